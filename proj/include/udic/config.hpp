#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "udic/geometry.hpp"
#include "udic/model.hpp"
#include "udic/simulate.hpp"
#include "udic/training.hpp"

namespace udic {

/// Linear-array probe description; explicit element positions override the
/// regular layout.
struct GeometryConfig {
    std::size_t n_elements = 8;
    double pitch = 1e-3;                 // [m]
    double first_element_x = 0.0;        // [m]; used when centered == false
    bool centered = true;                // center the aperture on x = 0
    double element_z = 0.0;              // [m]
    double sampling_frequency = 20e6;    // [Hz]
    double sound_speed = 5920.0;         // [m/s] carbon steel
    std::size_t n_time_samples = 128;
    double time_offset = 0.0;            // [s]
    std::vector<Point2> explicit_elements;

    AcquisitionGeometry build() const;
};

struct GridConfig {
    double origin_x = 0.0;  // [m]; used when centered == false
    bool centered = true;   // center laterally on x = 0
    double origin_z = 1.5e-3;
    double pitch_x = 0.5e-3;
    double pitch_z = 0.5e-3;
    std::size_t n_x = 24;
    std::size_t n_z = 32;

    ImagingGrid build() const;
};

struct ScenarioGenConfig {
    std::size_t min_scatterers = 1;
    std::size_t max_scatterers = 4;
    double amp_min = 0.3;
    double amp_max = 1.0;
    double margin_x = 1e-3;  // [m] keep-out from the grid edge
    double margin_z = 1e-3;
    std::size_t n_train = 64;
    std::size_t n_test = 16;

    ScenarioConfig build(const ImagingGrid& grid) const;
};

/// Full run configuration; every section has desk-scale defaults and the
/// resolved tree is echoed next to all outputs.
struct RunConfig {
    GeometryConfig geometry;
    GridConfig grid;
    PulseWaveform pulse{4e6, 0.6};
    ScenarioGenConfig scenario;
    ModelConfig model;  // data_shape filled from geometry on resolve()
    TrainingConfig training;

    /// Derives dependent fields (model data_shape) and validates.
    void resolve();
};

void to_json(nlohmann::json& j, const GeometryConfig& c);
void from_json(const nlohmann::json& j, GeometryConfig& c);
void to_json(nlohmann::json& j, const GridConfig& c);
void from_json(const nlohmann::json& j, GridConfig& c);
void to_json(nlohmann::json& j, const PulseWaveform& p);
void from_json(const nlohmann::json& j, PulseWaveform& p);
void to_json(nlohmann::json& j, const ScenarioGenConfig& c);
void from_json(const nlohmann::json& j, ScenarioGenConfig& c);
void to_json(nlohmann::json& j, const LayerSpec& l);
void from_json(const nlohmann::json& j, LayerSpec& l);
void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);
void to_json(nlohmann::json& j, const TrainingConfig& c);
void from_json(const nlohmann::json& j, TrainingConfig& c);
void to_json(nlohmann::json& j, const RunConfig& c);
void from_json(const nlohmann::json& j, RunConfig& c);

RunConfig load_run_config(const std::filesystem::path& path);
/// Writes the fully resolved configuration (pretty-printed JSON).
void write_resolved_config(const std::filesystem::path& path, const RunConfig& cfg);

}  // namespace udic

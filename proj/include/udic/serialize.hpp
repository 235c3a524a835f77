#pragma once

#include <filesystem>
#include <optional>

#include "udic/config.hpp"
#include "udic/io.hpp"
#include "udic/model.hpp"
#include "udic/simulate.hpp"
#include "udic/training.hpp"

namespace udic {

// Model file: container whose manifest carries the config echo, data scale,
// crop record, init seed and (when known) the acquisition setup; tensors are
// all parameters plus the codebook.

void save_model(const std::filesystem::path& path, const Model& model,
                const RunConfig* run_config = nullptr);
struct LoadedModel {
    Model model;
    nlohmann::json manifest;
};
LoadedModel load_model(const std::filesystem::path& path);

// Scenario file: container with tensors "f" (normalized FMC data) and "u"
// (target DAS image); the manifest records the phantom and synthesis scale.

struct Scenario {
    Phantom phantom;
    Tensor data;   // (n_t, n_s, n_r), normalized
    Tensor image;  // (n_x, n_z)
    double synth_scale = 1.0;
};

void save_scenario(const std::filesystem::path& path, const Scenario& scenario);
Scenario load_scenario(const std::filesystem::path& path);

/// Accepts a scenario container or a raw tensor file.
Tensor load_data_tensor(const std::filesystem::path& path);

// CLI-level operations shared by the tool and the tests.

/// encode + quantize + serialize; the stream is fingerprinted against the
/// model file bytes.
void compress_file(const std::filesystem::path& data_file,
                   const std::filesystem::path& model_file,
                   const std::filesystem::path& out_stream);

/// deserialize + dequantize + decode + DAS; refuses a stream whose
/// fingerprint does not match the model file.
Tensor decompress_file(const std::filesystem::path& stream_file,
                       const std::filesystem::path& model_file, const DelayTable& table);

/// In-process equivalents used for two-path equality checks.
io::CompressedStream compress_data(const Model& model, const Tensor& raw_data,
                                   const Sha256Digest& fingerprint);
Tensor decompress_to_image(const Model& model, const io::CompressedStream& stream,
                           const DelayTable& table);

/// Rebuilds the acquisition geometry and grid stored in a model manifest.
struct AcquisitionSetup {
    AcquisitionGeometry geometry;
    ImagingGrid grid;
};
std::optional<AcquisitionSetup> setup_from_manifest(const nlohmann::json& manifest);

}  // namespace udic

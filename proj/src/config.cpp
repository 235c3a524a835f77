#include "udic/config.hpp"

#include <fstream>
#include <stdexcept>

#include "udic/io.hpp"

namespace udic {

namespace {

template <class T>
void maybe(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) j.at(key).get_to(out);
}

}  // namespace

AcquisitionGeometry GeometryConfig::build() const {
    AcquisitionGeometry geom;
    if (!explicit_elements.empty()) {
        geom.element_positions = explicit_elements;
    } else {
        const double x0 = centered
                              ? -0.5 * static_cast<double>(n_elements - 1) * pitch
                              : first_element_x;
        for (std::size_t i = 0; i < n_elements; ++i)
            geom.element_positions.push_back({x0 + static_cast<double>(i) * pitch, element_z});
    }
    geom.sampling_frequency = sampling_frequency;
    geom.sound_speed = sound_speed;
    geom.n_time_samples = n_time_samples;
    geom.time_offset = time_offset;
    geom.validate();
    return geom;
}

ImagingGrid GridConfig::build() const {
    ImagingGrid grid;
    grid.origin.x = centered ? -0.5 * static_cast<double>(n_x - 1) * pitch_x : origin_x;
    grid.origin.z = origin_z;
    grid.pitch_x = pitch_x;
    grid.pitch_z = pitch_z;
    grid.n_x = n_x;
    grid.n_z = n_z;
    grid.validate();
    return grid;
}

ScenarioConfig ScenarioGenConfig::build(const ImagingGrid& grid) const {
    ScenarioConfig cfg;
    cfg.min_scatterers = min_scatterers;
    cfg.max_scatterers = max_scatterers;
    cfg.amp_min = amp_min;
    cfg.amp_max = amp_max;
    cfg.x_min = grid.origin.x + margin_x;
    cfg.x_max = grid.origin.x + static_cast<double>(grid.n_x - 1) * grid.pitch_x - margin_x;
    cfg.z_min = grid.origin.z + margin_z;
    cfg.z_max = grid.origin.z + static_cast<double>(grid.n_z - 1) * grid.pitch_z - margin_z;
    cfg.validate();
    return cfg;
}

void RunConfig::resolve() {
    const AcquisitionGeometry geom = geometry.build();
    grid.build();
    model.data_shape = {geom.n_time_samples, geom.n_elements(), geom.n_elements()};
    if (model.encoder.empty()) {
        // Desk-scale default: strides (2,2,2)/(2,2,2)/(1,1,1).
        model.encoder = {LayerSpec{8, {2, 2, 2}, true, false},
                         LayerSpec{8, {2, 2, 2}, true, false},
                         LayerSpec{16, {1, 1, 1}, true, false}};
        model.bottleneck_channels = 16;
    }
    validate_config(model);
    training.validate();
}

void to_json(nlohmann::json& j, const GeometryConfig& c) {
    j = nlohmann::json{{"n_elements", c.n_elements},
                       {"pitch", c.pitch},
                       {"centered", c.centered},
                       {"first_element_x", c.first_element_x},
                       {"element_z", c.element_z},
                       {"sampling_frequency", c.sampling_frequency},
                       {"sound_speed", c.sound_speed},
                       {"n_time_samples", c.n_time_samples},
                       {"time_offset", c.time_offset}};
    if (!c.explicit_elements.empty()) {
        nlohmann::json arr = nlohmann::json::array();
        for (const Point2& p : c.explicit_elements) arr.push_back({p.x, p.z});
        j["elements"] = arr;
    }
}

void from_json(const nlohmann::json& j, GeometryConfig& c) {
    maybe(j, "n_elements", c.n_elements);
    maybe(j, "pitch", c.pitch);
    maybe(j, "centered", c.centered);
    maybe(j, "first_element_x", c.first_element_x);
    maybe(j, "element_z", c.element_z);
    maybe(j, "sampling_frequency", c.sampling_frequency);
    maybe(j, "sound_speed", c.sound_speed);
    maybe(j, "n_time_samples", c.n_time_samples);
    maybe(j, "time_offset", c.time_offset);
    if (j.contains("first_element_x")) c.centered = false;
    if (j.contains("elements")) {
        for (const auto& e : j.at("elements"))
            c.explicit_elements.push_back({e.at(0).get<double>(), e.at(1).get<double>()});
    }
}

void to_json(nlohmann::json& j, const GridConfig& c) {
    j = nlohmann::json{{"centered", c.centered}, {"origin_x", c.origin_x},
                       {"origin_z", c.origin_z}, {"pitch_x", c.pitch_x},
                       {"pitch_z", c.pitch_z},   {"n_x", c.n_x},
                       {"n_z", c.n_z}};
}

void from_json(const nlohmann::json& j, GridConfig& c) {
    maybe(j, "centered", c.centered);
    maybe(j, "origin_x", c.origin_x);
    maybe(j, "origin_z", c.origin_z);
    maybe(j, "pitch_x", c.pitch_x);
    maybe(j, "pitch_z", c.pitch_z);
    maybe(j, "n_x", c.n_x);
    maybe(j, "n_z", c.n_z);
    if (j.contains("origin_x")) c.centered = false;
}

void to_json(nlohmann::json& j, const PulseWaveform& p) {
    j = nlohmann::json{{"center_frequency", p.center_frequency},
                       {"bandwidth_fraction", p.bandwidth_fraction}};
}

void from_json(const nlohmann::json& j, PulseWaveform& p) {
    maybe(j, "center_frequency", p.center_frequency);
    maybe(j, "bandwidth_fraction", p.bandwidth_fraction);
}

void to_json(nlohmann::json& j, const ScenarioGenConfig& c) {
    j = nlohmann::json{{"min_scatterers", c.min_scatterers},
                       {"max_scatterers", c.max_scatterers},
                       {"amp_min", c.amp_min},
                       {"amp_max", c.amp_max},
                       {"margin_x", c.margin_x},
                       {"margin_z", c.margin_z},
                       {"n_train", c.n_train},
                       {"n_test", c.n_test}};
}

void from_json(const nlohmann::json& j, ScenarioGenConfig& c) {
    maybe(j, "min_scatterers", c.min_scatterers);
    maybe(j, "max_scatterers", c.max_scatterers);
    maybe(j, "amp_min", c.amp_min);
    maybe(j, "amp_max", c.amp_max);
    maybe(j, "margin_x", c.margin_x);
    maybe(j, "margin_z", c.margin_z);
    maybe(j, "n_train", c.n_train);
    maybe(j, "n_test", c.n_test);
}

void to_json(nlohmann::json& j, const LayerSpec& l) {
    j = nlohmann::json{{"filters", l.filters},
                       {"stride", {l.stride[0], l.stride[1], l.stride[2]}},
                       {"weight_standardization", l.weight_standardization},
                       {"residual", l.residual}};
}

void from_json(const nlohmann::json& j, LayerSpec& l) {
    j.at("filters").get_to(l.filters);
    if (j.contains("stride")) {
        const auto& s = j.at("stride");
        for (std::size_t a = 0; a < 3; ++a) l.stride[a] = s.at(a).get<std::size_t>();
    }
    maybe(j, "weight_standardization", l.weight_standardization);
    maybe(j, "residual", l.residual);
}

void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = nlohmann::json{{"data_shape", {c.data_shape[0], c.data_shape[1], c.data_shape[2]}},
                       {"encoder", c.encoder},
                       {"bottleneck_channels", c.bottleneck_channels},
                       {"codebook_size", c.codebook_size},
                       {"norm_groups", c.norm_groups},
                       {"kernel_size", c.kernel_size},
                       {"groupnorm_eps", c.groupnorm_eps},
                       {"ws_eps", c.ws_eps}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
    if (j.contains("data_shape")) {
        const auto& s = j.at("data_shape");
        for (std::size_t a = 0; a < 3; ++a) c.data_shape[a] = s.at(a).get<std::size_t>();
    }
    if (j.contains("encoder")) {
        c.encoder.clear();
        for (const auto& e : j.at("encoder")) c.encoder.push_back(e.get<LayerSpec>());
        c.bottleneck_channels = c.encoder.back().filters;
    }
    maybe(j, "bottleneck_channels", c.bottleneck_channels);
    maybe(j, "codebook_size", c.codebook_size);
    maybe(j, "norm_groups", c.norm_groups);
    maybe(j, "kernel_size", c.kernel_size);
    maybe(j, "groupnorm_eps", c.groupnorm_eps);
    maybe(j, "ws_eps", c.ws_eps);
}

void to_json(nlohmann::json& j, const TrainingConfig& c) {
    j = nlohmann::json{
        {"variant",
         c.variant == LossVariant::data_to_image ? "data_to_image" : "data_to_data"},
        {"learning_rate", c.learning_rate},
        {"adam_beta1", c.adam_beta1},
        {"adam_beta2", c.adam_beta2},
        {"adam_eps", c.adam_eps},
        {"batch_size", c.batch_size},
        {"epochs", c.epochs},
        {"codebook_weight", c.codebook_weight},
        {"commitment_weight", c.commitment_weight},
        {"seed", c.seed},
        {"checkpoint_every", c.checkpoint_every}};
}

void from_json(const nlohmann::json& j, TrainingConfig& c) {
    if (j.contains("variant")) {
        const std::string v = j.at("variant").get<std::string>();
        if (v == "data_to_image")
            c.variant = LossVariant::data_to_image;
        else if (v == "data_to_data")
            c.variant = LossVariant::data_to_data;
        else
            throw std::invalid_argument("config: unknown training variant " + v);
    }
    maybe(j, "learning_rate", c.learning_rate);
    maybe(j, "adam_beta1", c.adam_beta1);
    maybe(j, "adam_beta2", c.adam_beta2);
    maybe(j, "adam_eps", c.adam_eps);
    maybe(j, "batch_size", c.batch_size);
    maybe(j, "epochs", c.epochs);
    maybe(j, "codebook_weight", c.codebook_weight);
    maybe(j, "commitment_weight", c.commitment_weight);
    maybe(j, "seed", c.seed);
    maybe(j, "checkpoint_every", c.checkpoint_every);
}

void to_json(nlohmann::json& j, const RunConfig& c) {
    j = nlohmann::json{{"geometry", c.geometry}, {"grid", c.grid},
                       {"pulse", c.pulse},       {"scenario", c.scenario},
                       {"model", c.model},       {"training", c.training}};
}

void from_json(const nlohmann::json& j, RunConfig& c) {
    maybe(j, "geometry", c.geometry);
    maybe(j, "grid", c.grid);
    maybe(j, "pulse", c.pulse);
    maybe(j, "scenario", c.scenario);
    maybe(j, "model", c.model);
    maybe(j, "training", c.training);
}

RunConfig load_run_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw std::runtime_error("config: cannot open " + path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::parse_error& e) {
        throw std::runtime_error("config: bad JSON in " + path.string() + ": " + e.what());
    }
    RunConfig cfg = j.get<RunConfig>();
    cfg.resolve();
    return cfg;
}

void write_resolved_config(const std::filesystem::path& path, const RunConfig& cfg) {
    const nlohmann::json j = cfg;
    io::atomic_write_text(path, j.dump(2) + "\n");
}

}  // namespace udic

#include "udic/serialize.hpp"

#include <stdexcept>

namespace udic {

namespace {

constexpr int kModelFormatVersion = 1;

std::vector<std::string> parameter_names(const Model& model) {
    std::vector<std::string> names;
    auto emit = [&names](const std::string& prefix, const std::vector<LayerParams>& layers) {
        for (std::size_t i = 0; i < layers.size(); ++i) {
            const std::string base = prefix + "." + std::to_string(i);
            names.push_back(base + ".weights");
            names.push_back(base + ".bias");
            if (layers[i].has_norm) {
                names.push_back(base + ".gamma");
                names.push_back(base + ".beta");
            }
        }
    };
    emit("enc", model.encoder);
    emit("dec", model.decoder);
    names.push_back("codebook");
    return names;
}

io::AnyTensor as_any(const Tensor& t) {
    io::AnyTensor a;
    a.dtype = io::Dtype::f64;
    a.shape = t.shape();
    a.f64 = t.values();
    return a;
}

}  // namespace

void save_model(const std::filesystem::path& path, const Model& model,
                const RunConfig* run_config) {
    io::Container c;
    c.manifest["kind"] = "model";
    c.manifest["format_version"] = kModelFormatVersion;
    c.manifest["config"] = model.config;
    c.manifest["data_scale"] = model.data_scale;
    c.manifest["init_seed"] = model.init_seed;
    c.manifest["crop"] = {model.plan.crop[0], model.plan.crop[1], model.plan.crop[2]};
    c.manifest["code_shape"] = {model.plan.code_shape[1], model.plan.code_shape[2],
                                model.plan.code_shape[3]};
    if (run_config) {
        c.manifest["geometry"] = run_config->geometry;
        c.manifest["grid"] = run_config->grid;
    }

    const std::vector<std::string> names = parameter_names(model);
    const std::vector<const Tensor*> params = parameter_tensors(model);
    for (std::size_t i = 0; i < params.size(); ++i)
        c.tensors.emplace_back(names[i], as_any(*params[i]));
    io::write_container(path, c);
}

LoadedModel load_model(const std::filesystem::path& path) {
    io::Container c = io::read_container(path);
    if (!c.manifest.contains("kind") || c.manifest["kind"] != "model")
        throw io::IoError(io::IoErrorCode::format_error,
                          path.string() + ": not a model container");

    LoadedModel loaded;
    loaded.manifest = c.manifest;
    const ModelConfig cfg = c.manifest.at("config").get<ModelConfig>();
    loaded.model = init_model(cfg, c.manifest.value("init_seed", std::uint64_t{0}));
    loaded.model.data_scale = c.manifest.value("data_scale", 1.0);

    const std::vector<std::string> names = parameter_names(loaded.model);
    std::vector<Tensor*> params = parameter_tensors(loaded.model);
    for (std::size_t i = 0; i < params.size(); ++i) {
        const io::AnyTensor& stored = c.tensor(names[i]);
        if (stored.dtype != io::Dtype::f64)
            throw io::IoError(io::IoErrorCode::dtype_mismatch,
                              path.string() + ": parameter " + names[i] + " is not f64");
        if (stored.shape != params[i]->shape())
            throw io::IoError(io::IoErrorCode::format_error,
                              path.string() + ": parameter " + names[i] + " shape mismatch");
        *params[i] = Tensor(stored.shape, stored.f64);
    }
    return loaded;
}

void save_scenario(const std::filesystem::path& path, const Scenario& scenario) {
    io::Container c;
    c.manifest["kind"] = "scenario";
    c.manifest["synth_scale"] = scenario.synth_scale;
    c.manifest["background_speed"] = scenario.phantom.background_speed;
    nlohmann::json scatterers = nlohmann::json::array();
    for (const Scatterer& s : scenario.phantom.scatterers)
        scatterers.push_back({{"x", s.position.x}, {"z", s.position.z},
                              {"amplitude", s.amplitude}});
    c.manifest["scatterers"] = scatterers;
    c.tensors.emplace_back("f", as_any(scenario.data));
    c.tensors.emplace_back("u", as_any(scenario.image));
    io::write_container(path, c);
}

Scenario load_scenario(const std::filesystem::path& path) {
    io::Container c = io::read_container(path);
    if (!c.manifest.contains("kind") || c.manifest["kind"] != "scenario")
        throw io::IoError(io::IoErrorCode::format_error,
                          path.string() + ": not a scenario container");
    Scenario s;
    s.synth_scale = c.manifest.value("synth_scale", 1.0);
    s.phantom.background_speed = c.manifest.value("background_speed", 0.0);
    if (c.manifest.contains("scatterers")) {
        for (const auto& j : c.manifest["scatterers"]) {
            Scatterer sc;
            sc.position.x = j.at("x").get<double>();
            sc.position.z = j.at("z").get<double>();
            sc.amplitude = j.at("amplitude").get<double>();
            s.phantom.scatterers.push_back(sc);
        }
    }
    const io::AnyTensor& f = c.tensor("f");
    const io::AnyTensor& u = c.tensor("u");
    if (f.dtype != io::Dtype::f64 || u.dtype != io::Dtype::f64)
        throw io::IoError(io::IoErrorCode::dtype_mismatch,
                          path.string() + ": scenario tensors must be f64");
    s.data = Tensor(f.shape, f.f64);
    s.image = Tensor(u.shape, u.f64);
    return s;
}

Tensor load_data_tensor(const std::filesystem::path& path) {
    const std::vector<std::uint8_t> bytes = io::read_file(path);
    if (bytes.size() >= 4 && bytes[0] == 'U' && bytes[1] == 'D' && bytes[2] == 'C') {
        io::Container c = io::decode_container(bytes);
        const io::AnyTensor& f = c.tensor("f");
        if (f.dtype != io::Dtype::f64)
            throw io::IoError(io::IoErrorCode::dtype_mismatch,
                              path.string() + ": data tensor must be f64");
        return Tensor(f.shape, f.f64);
    }
    io::AnyTensor t = io::decode_tensor(bytes);
    if (t.dtype != io::Dtype::f64)
        throw io::IoError(io::IoErrorCode::dtype_mismatch,
                          path.string() + ": data tensor must be f64");
    return Tensor(t.shape, std::move(t.f64));
}

io::CompressedStream compress_data(const Model& model, const Tensor& raw_data,
                                   const Sha256Digest& fingerprint) {
    if (model.codebook.count() > 65536)
        throw io::IoError(io::IoErrorCode::format_error,
                          "compress: codebook too large for u16 indices");
    Tensor f = raw_data;
    f *= 1.0 / model.data_scale;
    const IndexGrid q = quantize(encode(model, f), model.codebook);

    io::CompressedStream stream;
    stream.code_shape = q.shape;
    stream.codebook_size = static_cast<std::uint32_t>(model.codebook.count());
    stream.fingerprint = fingerprint;
    stream.indices.reserve(q.indices.size());
    for (std::uint32_t idx : q.indices)
        stream.indices.push_back(static_cast<std::uint16_t>(idx));
    return stream;
}

Tensor decompress_to_image(const Model& model, const io::CompressedStream& stream,
                           const DelayTable& table) {
    const auto grid_shape = model.code_grid();
    if (stream.code_shape != grid_shape ||
        stream.codebook_size != model.codebook.count())
        throw io::IoError(io::IoErrorCode::format_error,
                          "decompress: stream does not match model bottleneck");
    IndexGrid q;
    q.shape = stream.code_shape;
    q.indices.assign(stream.indices.begin(), stream.indices.end());
    Tensor f_tilde = decode(model, dequantize(q, model.codebook));
    Tensor image = das_forward(f_tilde, table);
    image *= model.data_scale;
    return image;
}

void compress_file(const std::filesystem::path& data_file,
                   const std::filesystem::path& model_file,
                   const std::filesystem::path& out_stream) {
    const LoadedModel loaded = load_model(model_file);
    const Sha256Digest fingerprint = io::file_fingerprint(model_file);
    const Tensor data = load_data_tensor(data_file);
    io::write_stream(out_stream, compress_data(loaded.model, data, fingerprint));
}

Tensor decompress_file(const std::filesystem::path& stream_file,
                       const std::filesystem::path& model_file, const DelayTable& table) {
    const io::CompressedStream stream = io::read_stream(stream_file);
    const Sha256Digest fingerprint = io::file_fingerprint(model_file);
    if (stream.fingerprint != fingerprint)
        throw io::IoError(io::IoErrorCode::fingerprint_mismatch,
                          stream_file.string() +
                              ": stream fingerprint does not match model file " +
                              model_file.string());
    const LoadedModel loaded = load_model(model_file);
    return decompress_to_image(loaded.model, stream, table);
}

std::optional<AcquisitionSetup> setup_from_manifest(const nlohmann::json& manifest) {
    if (!manifest.contains("geometry") || !manifest.contains("grid")) return std::nullopt;
    AcquisitionSetup setup;
    setup.geometry = manifest.at("geometry").get<GeometryConfig>().build();
    setup.grid = manifest.at("grid").get<GridConfig>().build();
    return setup;
}

}  // namespace udic

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "udic/config.hpp"
#include "udic/das.hpp"
#include "udic/gradcheck.hpp"
#include "udic/io.hpp"
#include "udic/metrics.hpp"
#include "udic/rng.hpp"
#include "udic/serialize.hpp"
#include "udic/simulate.hpp"
#include "udic/training.hpp"

namespace fs = std::filesystem;
using namespace udic;

namespace {

std::string scenario_name(const char* split, std::size_t index) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%s_%04zu.udc", split, index);
    return buf;
}

Scenario make_scenario(std::mt19937_64& rng, const RunConfig& cfg,
                       const AcquisitionGeometry& geom, const ImagingGrid& grid,
                       const DelayTable& table) {
    const ScenarioConfig sc = cfg.scenario.build(grid);
    Scenario scenario;
    scenario.phantom = sample_phantom(rng, sc, geom.sound_speed);
    FmcResult fmc = synthesize_fmc(scenario.phantom, geom, cfg.pulse);
    scenario.data = std::move(fmc.data);
    scenario.synth_scale = fmc.scale;
    scenario.image = das_forward(scenario.data, table);
    return scenario;
}

int run_simulate(const fs::path& config_path, const fs::path& out_dir, std::uint64_t seed) {
    RunConfig cfg = load_run_config(config_path);
    const AcquisitionGeometry geom = cfg.geometry.build();
    const ImagingGrid grid = cfg.grid.build();
    const DelayTable table = build_delay_table(geom, grid);

    fs::create_directories(out_dir / "train");
    fs::create_directories(out_dir / "test");
    std::mt19937_64 rng(seed);
    for (std::size_t i = 0; i < cfg.scenario.n_train; ++i)
        save_scenario(out_dir / "train" / scenario_name("scenario", i),
                      make_scenario(rng, cfg, geom, grid, table));
    for (std::size_t i = 0; i < cfg.scenario.n_test; ++i)
        save_scenario(out_dir / "test" / scenario_name("scenario", i),
                      make_scenario(rng, cfg, geom, grid, table));
    write_resolved_config(out_dir / "resolved_config.json", cfg);
    std::cout << "wrote " << cfg.scenario.n_train << " train + " << cfg.scenario.n_test
              << " test scenarios to " << out_dir.string() << "\n";
    return 0;
}

std::vector<Sample> load_split(const fs::path& dir) {
    std::vector<fs::path> files;
    if (fs::exists(dir))
        for (const auto& entry : fs::directory_iterator(dir))
            if (entry.path().extension() == ".udc") files.push_back(entry.path());
    std::sort(files.begin(), files.end());
    std::vector<Sample> samples;
    for (const fs::path& p : files) {
        Scenario s = load_scenario(p);
        samples.push_back({std::move(s.data), std::move(s.image)});
    }
    return samples;
}

int run_train(const fs::path& config_path, const fs::path& data_dir, const fs::path& out_model,
              std::uint64_t seed, const std::string& variant_override) {
    RunConfig cfg = load_run_config(config_path);
    cfg.training.seed = seed;
    if (variant_override == "data_to_image")
        cfg.training.variant = LossVariant::data_to_image;
    else if (variant_override == "data_to_data")
        cfg.training.variant = LossVariant::data_to_data;
    else if (!variant_override.empty())
        throw std::runtime_error("unknown variant: " + variant_override);

    Dataset dataset;
    dataset.train = load_split(data_dir / "train");
    dataset.test = load_split(data_dir / "test");
    if (dataset.train.empty())
        throw std::runtime_error("no training scenarios in " + (data_dir / "train").string());

    const AcquisitionGeometry geom = cfg.geometry.build();
    const ImagingGrid grid = cfg.grid.build();
    const DelayTable table = build_delay_table(geom, grid);

    const fs::path log_path = out_model.string() + ".metrics.log";
    std::ofstream log(log_path, std::ios::app);
    log << "# epoch\ttrain_loss\ttest_loss\ttest_ssim_mean\tcodebook_used_fraction\n";

    const CheckpointFn checkpoint = [&](const Model& m, std::size_t epoch) {
        save_model(out_model.string() + ".epoch" + std::to_string(epoch), m, &cfg);
    };

    TrainResult result = train(dataset, cfg.model, cfg.training, table, checkpoint);
    for (const EpochRecord& rec : result.log) {
        log << format_epoch_record(rec) << "\n";
        std::cout << format_epoch_record(rec) << "\n";
    }
    save_model(out_model, result.model, &cfg);
    write_resolved_config(out_model.string() + ".config.json", cfg);
    std::cout << "model written to " << out_model.string() << "\n";
    return 0;
}

DelayTable table_for_model(const LoadedModel& loaded, const std::string& config_path) {
    if (!config_path.empty()) {
        const RunConfig cfg = load_run_config(config_path);
        return build_delay_table(cfg.geometry.build(), cfg.grid.build());
    }
    const auto setup = setup_from_manifest(loaded.manifest);
    if (!setup)
        throw std::runtime_error(
            "model file carries no acquisition setup; pass --config");
    return build_delay_table(setup->geometry, setup->grid);
}

int run_compress(const fs::path& input, const fs::path& model_file, const fs::path& out) {
    compress_file(input, model_file, out);
    std::cout << "stream written to " << out.string() << "\n";
    return 0;
}

int run_decompress(const fs::path& stream_file, const fs::path& model_file,
                   const std::string& config_path, const fs::path& out_image,
                   const std::string& preview) {
    const LoadedModel loaded = load_model(model_file);
    const DelayTable table = table_for_model(loaded, config_path);
    const Tensor image = decompress_file(stream_file, model_file, table);
    io::write_tensor(out_image, image);
    if (!preview.empty()) io::write_pgm(preview, image);
    std::cout << "image written to " << out_image.string() << "\n";
    return 0;
}

int run_image(const std::string& config_path, const fs::path& input, const fs::path& out,
              const std::string& preview) {
    const RunConfig cfg = load_run_config(config_path);
    const DelayTable table = build_delay_table(cfg.geometry.build(), cfg.grid.build());
    const Tensor f = load_data_tensor(input);
    const Tensor image = das_forward(f, table);
    io::write_tensor(out, image);
    if (!preview.empty()) io::write_pgm(preview, image);
    std::cout << "image written to " << out.string() << "\n";
    return 0;
}

int run_eval(const fs::path& model_file, const fs::path& data_dir,
             const std::string& config_path) {
    const LoadedModel loaded = load_model(model_file);
    const DelayTable table = table_for_model(loaded, config_path);
    const std::vector<Sample> items = load_split(data_dir / "test");
    if (items.empty()) throw std::runtime_error("no test scenarios in " + data_dir.string());

    std::vector<double> scores;
    const Sha256Digest fingerprint = io::file_fingerprint(model_file);
    for (const Sample& item : items) {
        const io::CompressedStream stream =
            compress_data(loaded.model, item.data, fingerprint);
        const Tensor image = decompress_to_image(loaded.model, stream, table);
        scores.push_back(ssim(image, item.image));
    }
    double mean = 0.0;
    for (double s : scores) mean += s;
    mean /= static_cast<double>(scores.size());
    double var = 0.0;
    for (double s : scores) var += (s - mean) * (s - mean);
    var /= static_cast<double>(scores.size());
    std::cout << "test items: " << scores.size() << "\n";
    std::cout << "ssim mean:  " << mean << "\n";
    std::cout << "ssim std:   " << std::sqrt(var) << "\n";
    return 0;
}

int run_gradcheck(std::uint64_t seed) {
    const auto results = run_gradient_suite(seed);
    for (const GradCheckResult& r : results)
        std::cout << (r.pass ? "PASS " : "FAIL ") << r.name
                  << "  max_rel_err=" << r.max_rel_err << "\n";
    return all_passed(results) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"udic: learned data-to-image compression for ultrasonic FMC data"};
    app.require_subcommand(1);

    std::string config_path, data_path, out_path, model_path, stream_path, preview_path;
    std::string variant;
    std::uint64_t seed = 0;

    CLI::App* sim = app.add_subcommand("simulate", "generate synthetic FMC scenarios");
    sim->add_option("--config", config_path, "run configuration (JSON)")->required();
    sim->add_option("--out", out_path, "output directory")->required();
    sim->add_option("--seed", seed, "RNG seed");

    CLI::App* tr = app.add_subcommand("train", "train a compression model");
    tr->add_option("--config", config_path, "run configuration (JSON)")->required();
    tr->add_option("--data", data_path, "dataset directory (train/ + test/)")->required();
    tr->add_option("--out", out_path, "output model file")->required();
    tr->add_option("--seed", seed, "RNG seed");
    tr->add_option("--variant", variant, "data_to_image | data_to_data");

    CLI::App* co = app.add_subcommand("compress", "compress FMC data to an index stream");
    co->add_option("--input", data_path, "scenario container or raw tensor")->required();
    co->add_option("--model", model_path, "model file")->required();
    co->add_option("--out", out_path, "output stream file")->required();

    CLI::App* de = app.add_subcommand("decompress", "decompress a stream to a DAS image");
    de->add_option("--stream", stream_path, "compressed stream")->required();
    de->add_option("--model", model_path, "model file")->required();
    de->add_option("--out", out_path, "output image tensor")->required();
    de->add_option("--config", config_path, "geometry configuration (JSON)");
    de->add_option("--preview", preview_path, "8-bit PGM preview path");

    CLI::App* im = app.add_subcommand("image", "DAS image from original data");
    im->add_option("--config", config_path, "run configuration (JSON)")->required();
    im->add_option("--input", data_path, "scenario container or raw tensor")->required();
    im->add_option("--out", out_path, "output image tensor")->required();
    im->add_option("--preview", preview_path, "8-bit PGM preview path");

    CLI::App* ev = app.add_subcommand("eval", "mean/std SSIM over a test directory");
    ev->add_option("--model", model_path, "model file")->required();
    ev->add_option("--data", data_path, "dataset directory")->required();
    ev->add_option("--config", config_path, "geometry configuration (JSON)");

    CLI::App* gc = app.add_subcommand("gradcheck", "finite-difference gradient suite");
    gc->add_option("--seed", seed, "RNG seed");

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return run_simulate(config_path, out_path, seed);
        if (tr->parsed()) return run_train(config_path, data_path, out_path, seed, variant);
        if (co->parsed()) return run_compress(data_path, model_path, out_path);
        if (de->parsed())
            return run_decompress(stream_path, model_path, config_path, out_path,
                                  preview_path);
        if (im->parsed()) return run_image(config_path, data_path, out_path, preview_path);
        if (ev->parsed()) return run_eval(model_path, data_path, config_path);
        if (gc->parsed()) return run_gradcheck(seed);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}

#include <doctest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <random>

#include "udic/config.hpp"
#include "udic/io.hpp"
#include "udic/rng.hpp"
#include "udic/serialize.hpp"
#include "udic/sha256.hpp"

using namespace udic;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
    const fs::path dir = fs::temp_directory_path() / "udic_io_tests";
    fs::create_directories(dir);
    return dir;
}

Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = uniform(rng, -10.0, 10.0);
    return t;
}

ModelConfig tiny_model_config() {
    ModelConfig cfg;
    cfg.data_shape = {16, 4, 4};
    cfg.encoder = {LayerSpec{4, {2, 2, 2}, true, false}, LayerSpec{4, {2, 1, 1}, false, false}};
    cfg.bottleneck_channels = 4;
    cfg.codebook_size = 6;
    cfg.norm_groups = 2;
    cfg.kernel_size = 3;
    return cfg;
}

DelayTable tiny_table(std::mt19937_64& rng) {
    DelayTable table;
    table.n_x = 4;
    table.n_z = 3;
    table.n_t = 16;
    table.n_s = 4;
    table.n_r = 4;
    const std::size_t n = table.n_pixels() * 16;
    table.fractional_index.resize(n);
    table.valid.resize(n, 1);
    for (std::size_t i = 0; i < n; ++i) table.fractional_index[i] = uniform(rng, 0.0, 14.5);
    return table;
}

}  // namespace

TEST_SUITE("io") {

TEST_CASE("sha256 matches the published test vectors") {
    CHECK(hex_digest(sha256("")) ==
          "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(hex_digest(sha256("abc")) ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    // Two blocks with length padding spilling into a third.
    CHECK(hex_digest(sha256(std::string(56, 'a'))) ==
          "b35439a4ac6f0948b6d6f9e3c6af0f5f590ce20f1bde7090ef7970686ec6738a");
}

TEST_CASE("rank-0 tensor round-trips") {
    const fs::path path = temp_dir() / "scalar.udt";
    Tensor scalar(std::vector<std::size_t>{});
    scalar[0] = -3.25;
    io::write_tensor(path, scalar);
    const Tensor back = io::read_tensor(path);
    CHECK(back.rank() == 0);
    CHECK(back.size() == 1);
    CHECK(back[0] == -3.25);
}

TEST_CASE("zero-filled 2x3 f64 tensor file is exactly 70 bytes") {
    const fs::path path = temp_dir() / "2x3.udt";
    io::write_tensor(path, Tensor({2, 3}));
    CHECK(fs::file_size(path) == 70);  // 4 magic + 1 dtype + 1 ndim + 16 dims + 48 payload
}

TEST_CASE("tensor round-trip is bitwise for all dtypes") {
    std::mt19937_64 rng(701);
    const fs::path dir = temp_dir();

    const Tensor t = random_tensor({3, 4, 2}, rng);
    io::write_tensor(dir / "f64.udt", t);
    const std::vector<std::uint8_t> once = io::read_file(dir / "f64.udt");
    const Tensor back = io::read_tensor(dir / "f64.udt");
    CHECK(std::memcmp(back.data(), t.data(), t.size() * sizeof(double)) == 0);
    io::write_tensor(dir / "f64.udt", back);
    CHECK(io::read_file(dir / "f64.udt") == once);

    std::vector<float> f32(24);
    for (float& v : f32) v = static_cast<float>(uniform(rng, -5.0, 5.0));
    const auto f32_bytes = io::encode_tensor_f32({4, 6}, f32);
    const io::AnyTensor f32_back = io::decode_tensor(f32_bytes);
    CHECK(f32_back.dtype == io::Dtype::f32);
    CHECK(f32_back.f32 == f32);

    std::vector<std::uint16_t> u16(30);
    for (auto& v : u16) v = static_cast<std::uint16_t>(uniform_index(rng, 65536));
    io::write_tensor_u16(dir / "u16.udt", {5, 6}, u16);
    const io::AnyTensor u16_back = io::read_tensor_any(dir / "u16.udt");
    CHECK(u16_back.dtype == io::Dtype::u16);
    CHECK(u16_back.u16 == u16);
}

TEST_CASE("tensor decode errors are distinct") {
    std::mt19937_64 rng(702);
    const Tensor t = random_tensor({2, 2}, rng);
    std::vector<std::uint8_t> good = io::encode_tensor(t);

    std::vector<std::uint8_t> bad_magic = good;
    bad_magic[0] = 'X';
    try {
        io::decode_tensor(bad_magic);
        FAIL("expected bad magic");
    } catch (const io::IoError& e) {
        CHECK(e.code() == io::IoErrorCode::bad_magic);
    }

    std::vector<std::uint8_t> truncated(good.begin(), good.end() - 9);
    try {
        io::decode_tensor(truncated);
        FAIL("expected truncation");
    } catch (const io::IoError& e) {
        CHECK(e.code() == io::IoErrorCode::truncated);
    }

    std::vector<std::uint8_t> trailing = good;
    trailing.push_back(0);
    try {
        io::decode_tensor(trailing);
        FAIL("expected trailing-bytes error");
    } catch (const io::IoError& e) {
        CHECK(e.code() == io::IoErrorCode::format_error);
    }

    const fs::path dir = temp_dir();
    std::vector<std::uint16_t> u16(4, 1);
    io::write_tensor_u16(dir / "mismatch.udt", {2, 2}, u16);
    try {
        io::read_tensor(dir / "mismatch.udt");
        FAIL("expected dtype mismatch");
    } catch (const io::IoError& e) {
        CHECK(e.code() == io::IoErrorCode::dtype_mismatch);
    }
}

TEST_CASE("container round-trips manifest and tensors") {
    std::mt19937_64 rng(703);
    io::Container c;
    c.manifest["kind"] = "test";
    c.manifest["nested"] = {{"a", 1}, {"b", 2.5}};

    io::AnyTensor a;
    a.dtype = io::Dtype::f64;
    a.shape = {2, 3};
    a.f64 = {1, 2, 3, 4, 5, 6};
    c.tensors.emplace_back("field", a);

    io::AnyTensor b;
    b.dtype = io::Dtype::u16;
    b.shape = {4};
    b.u16 = {9, 8, 7, 6};
    c.tensors.emplace_back("indices", b);

    const fs::path path = temp_dir() / "container.udc";
    io::write_container(path, c);
    const io::Container back = io::read_container(path);
    CHECK(back.manifest == c.manifest);
    REQUIRE(back.tensors.size() == 2);
    CHECK(back.tensor("field").f64 == a.f64);
    CHECK(back.tensor("indices").u16 == b.u16);
    CHECK_THROWS_AS(back.tensor("absent"), io::IoError);
}

TEST_CASE("stream layout: header plus two bytes per index") {
    io::CompressedStream s;
    s.code_shape = {30, 10, 10};
    s.codebook_size = 512;
    s.indices.assign(3000, 511);
    const auto bytes = io::encode_stream(s);
    CHECK(bytes.size() == 4 + 12 + 4 + 32 + 6000);  // 6052

    const io::CompressedStream back = io::decode_stream(bytes);
    CHECK(back.code_shape == s.code_shape);
    CHECK(back.codebook_size == 512);
    CHECK(back.indices == s.indices);
}

TEST_CASE("stream rejects out-of-range indices") {
    io::CompressedStream s;
    s.code_shape = {1, 1, 2};
    s.codebook_size = 4;
    s.indices = {3, 4};  // 4 >= L
    CHECK_THROWS_AS(io::encode_stream(s), io::IoError);

    s.indices = {3, 3};
    auto bytes = io::encode_stream(s);
    bytes[4 + 12] = 2;  // L := 2, below the stored indices
    try {
        io::decode_stream(bytes);
        FAIL("expected bad index");
    } catch (const io::IoError& e) {
        CHECK(e.code() == io::IoErrorCode::bad_index);
    }
}

TEST_CASE("pgm preview carries the expected header and size") {
    Tensor image({6, 4});
    for (std::size_t i = 0; i < image.size(); ++i) image[i] = static_cast<double>(i);
    const fs::path path = temp_dir() / "preview.pgm";
    io::write_pgm(path, image);
    const auto bytes = io::read_file(path);
    const std::string header = "P5\n6 4\n255\n";
    REQUIRE(bytes.size() == header.size() + 24);
    CHECK(std::memcmp(bytes.data(), header.data(), header.size()) == 0);
    CHECK(bytes.back() == 255);  // max value maps to white
}

TEST_CASE("model file round-trips bitwise") {
    const ModelConfig cfg = tiny_model_config();
    Model model = init_model(cfg, 99);
    model.data_scale = 0.7321;
    const fs::path path = temp_dir() / "model.udm";
    save_model(path, model);
    const std::vector<std::uint8_t> once = io::read_file(path);

    const LoadedModel back = load_model(path);
    CHECK(back.model.data_scale == model.data_scale);
    CHECK(back.model.init_seed == 99);
    const auto pa = parameter_tensors(model);
    const auto pb = parameter_tensors(back.model);
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i)
        CHECK(std::memcmp(pa[i]->data(), pb[i]->data(), pa[i]->size() * sizeof(double)) == 0);

    save_model(path, back.model);
    CHECK(io::read_file(path) == once);
}

TEST_CASE("scenario file round-trips") {
    std::mt19937_64 rng(704);
    Scenario s;
    s.phantom.background_speed = 5920.0;
    s.phantom.scatterers = {{{1e-3, 4e-3}, 0.5}, {{-2e-3, 6e-3}, -0.25}};
    s.data = random_tensor({16, 4, 4}, rng);
    s.image = random_tensor({4, 3}, rng);
    s.synth_scale = 2.5;

    const fs::path path = temp_dir() / "scenario.udc";
    save_scenario(path, s);
    const Scenario back = load_scenario(path);
    CHECK(back.synth_scale == 2.5);
    CHECK(back.phantom.scatterers.size() == 2);
    CHECK(back.phantom.scatterers[1].amplitude == -0.25);
    CHECK(std::memcmp(back.data.data(), s.data.data(), s.data.size() * sizeof(double)) == 0);
    CHECK(std::memcmp(back.image.data(), s.image.data(), s.image.size() * sizeof(double)) == 0);
}

TEST_CASE("compress/decompress files match the in-process pipeline bitwise") {
    std::mt19937_64 rng(705);
    const ModelConfig cfg = tiny_model_config();
    Model model = init_model(cfg, 42);
    model.data_scale = 0.9;
    const DelayTable table = tiny_table(rng);

    const fs::path dir = temp_dir();
    const fs::path model_path = dir / "pipeline_model.udm";
    save_model(model_path, model);

    const Tensor f = random_tensor({16, 4, 4}, rng);
    io::write_tensor(dir / "data.udt", f);

    compress_file(dir / "data.udt", model_path, dir / "stream.uvq");
    const Tensor via_files = decompress_file(dir / "stream.uvq", model_path, table);

    const Sha256Digest fp = io::file_fingerprint(model_path);
    const io::CompressedStream stream = compress_data(model, f, fp);
    const Tensor in_process = decompress_to_image(model, stream, table);

    REQUIRE(via_files.same_shape(in_process));
    CHECK(std::memcmp(via_files.data(), in_process.data(),
                      in_process.size() * sizeof(double)) == 0);

    SUBCASE("decompress refuses a fingerprint mismatch") {
        // Re-save the model with a different data scale: same architecture,
        // different bytes, so the stored fingerprint no longer matches.
        model.data_scale = 0.5;
        save_model(model_path, model);
        try {
            decompress_file(dir / "stream.uvq", model_path, table);
            FAIL("expected fingerprint mismatch");
        } catch (const io::IoError& e) {
            CHECK(e.code() == io::IoErrorCode::fingerprint_mismatch);
        }
    }
}

TEST_CASE("run config JSON round-trip preserves resolved values") {
    RunConfig cfg;
    cfg.geometry.n_elements = 8;
    cfg.geometry.n_time_samples = 128;
    cfg.training.epochs = 5;
    cfg.resolve();

    nlohmann::json j = cfg;
    RunConfig back = j.get<RunConfig>();
    back.resolve();
    CHECK(back.geometry.n_elements == 8);
    CHECK(back.model.data_shape[0] == 128);
    CHECK(back.model.data_shape[1] == 8);
    CHECK(back.training.epochs == 5);
    CHECK(back.model.encoder.size() == cfg.model.encoder.size());
}

}  // TEST_SUITE

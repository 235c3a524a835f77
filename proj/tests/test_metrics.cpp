#include <doctest.h>

#include <cmath>
#include <random>

#include "udic/metrics.hpp"
#include "udic/rng.hpp"

using namespace udic;

namespace {

Tensor random_image(std::size_t n_x, std::size_t n_z, std::mt19937_64& rng, double lo = -1.0,
                    double hi = 1.0) {
    Tensor t({n_x, n_z});
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = uniform(rng, lo, hi);
    return t;
}

}  // namespace

TEST_SUITE("metrics") {

TEST_CASE("ssim of an image with itself is 1") {
    std::mt19937_64 rng(601);
    const Tensor a = random_image(16, 20, rng);
    CHECK(std::abs(ssim(a, a) - 1.0) <= 1e-12);
}

TEST_CASE("ssim is symmetric with the derived dynamic range") {
    std::mt19937_64 rng(602);
    for (int trial = 0; trial < 10; ++trial) {
        const Tensor a = random_image(14, 14, rng);
        const Tensor b = random_image(14, 14, rng);
        CHECK(std::abs(ssim(a, b) - ssim(b, a)) <= 1e-12);
    }
}

TEST_CASE("constant images reduce to the closed-form luminance term") {
    const double v = 0.4, delta = 0.3;
    Tensor a({4, 4});
    a.fill(v);
    Tensor b({4, 4});
    b.fill(v + delta);

    SsimConfig cfg;
    cfg.window = SsimWindow::uniform;
    cfg.window_size = 4;

    // Variances vanish, so only the luminance factor survives; the derived
    // dynamic range equals delta.
    const double c1 = (cfg.k1 * delta) * (cfg.k1 * delta);
    const double expected =
        (2.0 * v * (v + delta) + c1) / (v * v + (v + delta) * (v + delta) + c1);
    CHECK(std::abs(ssim(a, b, cfg) - expected) <= 1e-12);
}

TEST_CASE("ssim of a zero-mean image against its negation is negative") {
    // Checkerboard: every window mean vanishes, so the luminance factor is 1
    // and the sign comes from the structure term alone.
    Tensor a({16, 16});
    for (std::size_t ix = 0; ix < 16; ++ix)
        for (std::size_t iz = 0; iz < 16; ++iz)
            a.at(ix, iz) = ((ix + iz) % 2 == 0) ? 0.8 : -0.8;
    Tensor b = a;
    b *= -1.0;

    SsimConfig cfg;
    cfg.window = SsimWindow::uniform;
    cfg.window_size = 8;
    CHECK(ssim(a, b, cfg) < 0.0);
}

TEST_CASE("ssim is at most 1 and drops under any perturbation") {
    std::mt19937_64 rng(604);
    const Tensor a = random_image(12, 12, rng);
    for (int trial = 0; trial < 25; ++trial) {
        Tensor b = a;
        const std::size_t idx = uniform_index(rng, b.size());
        b[idx] += uniform(rng, 0.2, 1.0);
        const double s = ssim(a, b);
        CHECK(s <= 1.0);
        CHECK(s < 1.0);
    }
}

TEST_CASE("uniform 8x8 window works on desk-scale images") {
    std::mt19937_64 rng(605);
    const Tensor a = random_image(24, 32, rng);
    SsimConfig cfg;
    cfg.window = SsimWindow::uniform;
    cfg.window_size = 8;
    CHECK(std::abs(ssim(a, a, cfg) - 1.0) <= 1e-12);
}

TEST_CASE("windows that do not fit are rejected") {
    std::mt19937_64 rng(606);
    const Tensor a = random_image(8, 8, rng);
    SsimConfig cfg;  // 11x11 gaussian
    CHECK_THROWS_AS(ssim(a, a, cfg), std::invalid_argument);

    cfg.window_size = 0;
    CHECK_THROWS_AS(ssim(a, a, cfg), std::invalid_argument);
}

TEST_CASE("shape mismatches are rejected") {
    std::mt19937_64 rng(607);
    const Tensor a = random_image(12, 12, rng);
    const Tensor b = random_image(12, 13, rng);
    CHECK_THROWS_AS(ssim(a, b), std::invalid_argument);
    CHECK_THROWS_AS(mse(a, b), std::invalid_argument);
}

TEST_CASE("mse examples and loop oracle") {
    Tensor a({3, 4});
    CHECK(mse(a, a) == 0.0);

    Tensor b({3, 4});
    b.fill(1.0);
    CHECK(mse(a, b) == 1.0);

    std::mt19937_64 rng(608);
    const Tensor x = random_image(5, 7, rng);
    const Tensor y = random_image(5, 7, rng);
    double expected = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        expected += (x[i] - y[i]) * (x[i] - y[i]);
    expected /= static_cast<double>(x.size());
    CHECK(std::abs(mse(x, y) - expected) <= 1e-12 * std::max(1.0, expected));
}

}  // TEST_SUITE

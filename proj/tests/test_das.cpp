#include <doctest.h>

#include <cmath>
#include <random>

#include "udic/das.hpp"
#include "udic/geometry.hpp"
#include "udic/rng.hpp"

using namespace udic;

namespace {

DelayTable random_table(std::mt19937_64& rng, std::size_t n_x, std::size_t n_z,
                        std::size_t n_t, std::size_t n_e, double invalid_fraction = 0.15) {
    DelayTable table;
    table.n_x = n_x;
    table.n_z = n_z;
    table.n_t = n_t;
    table.n_s = n_e;
    table.n_r = n_e;
    const std::size_t n = table.n_pixels() * n_e * n_e;
    table.fractional_index.resize(n);
    table.valid.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        table.fractional_index[i] = uniform(rng, 0.0, static_cast<double>(n_t) - 1.05);
        table.valid[i] = uniform_unit(rng) < invalid_fraction ? 0 : 1;
    }
    return table;
}

Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = uniform(rng, -1.0, 1.0);
    return t;
}

/// Independent scalar reference: plain triple loop over (pixel, s, m) with
/// explicit interpolation, no shared code with das_forward.
Tensor das_reference(const Tensor& f, const DelayTable& table) {
    Tensor u({table.n_x, table.n_z});
    for (std::size_t pixel = 0; pixel < table.n_pixels(); ++pixel) {
        double acc = 0.0;
        for (std::size_t s = 0; s < table.n_s; ++s)
            for (std::size_t m = 0; m < table.n_r; ++m) {
                const std::size_t e = table.entry(pixel, s, m);
                if (!table.valid[e]) continue;
                const double idx = table.fractional_index[e];
                const double k = std::floor(idx);
                const double w = idx - k;
                const auto k0 = static_cast<std::size_t>(k);
                acc += (1.0 - w) * f.at(k0, s, m) + w * f.at(k0 + 1, s, m);
            }
        u[pixel] = acc;
    }
    return u;
}

}  // namespace

TEST_SUITE("das") {

TEST_CASE("forward of zero data is a zero image") {
    std::mt19937_64 rng(201);
    const DelayTable table = random_table(rng, 3, 3, 32, 2);
    const Tensor u = das_forward(Tensor({32, 2, 2}), table);
    for (std::size_t i = 0; i < u.size(); ++i) CHECK(u[i] == 0.0);
}

TEST_CASE("forward picks out a single integer-delay sample") {
    DelayTable table;
    table.n_x = 1;
    table.n_z = 1;
    table.n_t = 16;
    table.n_s = 1;
    table.n_r = 1;
    table.fractional_index = {7.0};
    table.valid = {1};

    Tensor f({16, 1, 1});
    f.at(7, 0, 0) = 3.0;
    const Tensor u = das_forward(f, table);
    CHECK(u[0] == 3.0);
}

TEST_CASE("forward matches the naive triple-loop reference") {
    std::mt19937_64 rng(202);
    for (int trial = 0; trial < 5; ++trial) {
        const DelayTable table = random_table(rng, 3, 3, 32, 2);
        const Tensor f = random_tensor({32, 2, 2}, rng);
        const Tensor u = das_forward(f, table);
        const Tensor ref = das_reference(f, table);
        for (std::size_t i = 0; i < u.size(); ++i) {
            const double denom = std::max(1e-300, std::abs(ref[i]));
            CHECK(std::abs(u[i] - ref[i]) / denom <= 1e-12);
        }
    }
}

TEST_CASE("adjoint of zero image is zero data") {
    std::mt19937_64 rng(203);
    const DelayTable table = random_table(rng, 2, 2, 16, 2);
    const Tensor f = das_adjoint(Tensor({2, 2}), table);
    for (std::size_t i = 0; i < f.size(); ++i) CHECK(f[i] == 0.0);
}

TEST_CASE("adjoint scatters interpolation weights") {
    DelayTable table;
    table.n_x = 1;
    table.n_z = 1;
    table.n_t = 16;
    table.n_s = 1;
    table.n_r = 1;
    table.fractional_index = {10.25};
    table.valid = {1};

    Tensor u({1, 1});
    u[0] = 1.0;
    const Tensor f = das_adjoint(u, table);
    CHECK(f.at(10, 0, 0) == 0.75);
    CHECK(f.at(11, 0, 0) == 0.25);
    double total = 0.0;
    for (std::size_t i = 0; i < f.size(); ++i) total += std::abs(f[i]);
    CHECK(total == 1.0);
}

TEST_CASE("dot-product adjoint identity") {
    std::mt19937_64 rng(204);
    for (int trial = 0; trial < 20; ++trial) {
        const DelayTable table = random_table(rng, 3, 4, 24, 3);
        const Tensor f = random_tensor({24, 3, 3}, rng);
        const Tensor u = random_tensor({3, 4}, rng);
        const Tensor bf = das_forward(f, table);
        const Tensor btu = das_adjoint(u, table);
        const double lhs = dot(bf, u);
        const double rhs = dot(f, btu);
        CHECK(std::abs(lhs - rhs) <= 1e-10 * l2_norm(bf) * l2_norm(u) + 1e-300);
    }
}

TEST_CASE("forward is linear") {
    std::mt19937_64 rng(205);
    const DelayTable table = random_table(rng, 3, 3, 32, 2);
    const Tensor f1 = random_tensor({32, 2, 2}, rng);
    const Tensor f2 = random_tensor({32, 2, 2}, rng);
    const double a = 1.7, b = -0.4;

    Tensor combo = f1;
    combo *= a;
    Tensor f2b = f2;
    f2b *= b;
    combo += f2b;

    const Tensor lhs = das_forward(combo, table);
    Tensor rhs = das_forward(f1, table);
    rhs *= a;
    Tensor u2 = das_forward(f2, table);
    u2 *= b;
    rhs += u2;

    for (std::size_t i = 0; i < lhs.size(); ++i) {
        const double denom = std::max(1.0, std::abs(rhs[i]));
        CHECK(std::abs(lhs[i] - rhs[i]) / denom <= 1e-12);
    }
}

TEST_CASE("forward reproduces adjoint impulse weights") {
    std::mt19937_64 rng(206);
    const DelayTable table = random_table(rng, 2, 2, 16, 1, 0.0);
    Tensor u({2, 2});
    u[1] = 1.0;
    const Tensor spread = das_adjoint(u, table);
    const Tensor back = das_forward(spread, table);
    // Pixel 1 sees its own interpolation weights back: (1-w)^2 + w^2 per
    // (s, m); other pixels see cross terms, all bounded by 1.
    const double idx = table.fractional_index[table.entry(1, 0, 0)];
    const double w = idx - std::floor(idx);
    CHECK(back[1] == doctest::Approx((1.0 - w) * (1.0 - w) + w * w).epsilon(1e-12));
}

TEST_CASE("shape mismatches are rejected") {
    std::mt19937_64 rng(207);
    const DelayTable table = random_table(rng, 2, 2, 16, 2);
    CHECK_THROWS_AS(das_forward(Tensor({15, 2, 2}), table), std::invalid_argument);
    CHECK_THROWS_AS(das_forward(Tensor({16, 1, 2}), table), std::invalid_argument);
    CHECK_THROWS_AS(das_adjoint(Tensor({3, 2}), table), std::invalid_argument);
}

TEST_CASE("theoretical lossless rate") {
    CHECK(theoretical_lossless_rate({1020, 64, 64}, {72, 118}) ==
          doctest::Approx(4177920.0 / 8496.0).epsilon(1e-12));
    // The paper rounds this ratio to ~492.
    CHECK(theoretical_lossless_rate({1020, 64, 64}, {72, 118}) > 491.0);
    CHECK(theoretical_lossless_rate({1020, 64, 64}, {72, 118}) < 492.0);
    CHECK(theoretical_lossless_rate({8, 2, 2}, {4, 8}) == 1.0);
    CHECK(theoretical_lossless_rate({100, 4, 4}, {10, 10}) == 16.0);
    CHECK_THROWS_AS(theoretical_lossless_rate({0, 2, 2}, {4, 8}), std::invalid_argument);
    CHECK_THROWS_AS(theoretical_lossless_rate({8, 2, 2}, {0, 8}), std::invalid_argument);
}

}  // TEST_SUITE

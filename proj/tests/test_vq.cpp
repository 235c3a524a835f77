#include <doctest.h>

#include <cmath>
#include <random>

#include "udic/rng.hpp"
#include "udic/vq.hpp"

using namespace udic;

namespace {

Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng, double lo = -1.0,
                     double hi = 1.0) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = uniform(rng, lo, hi);
    return t;
}

Codebook random_codebook(std::size_t D, std::size_t L, std::mt19937_64& rng) {
    Codebook cb(D, L);
    cb.codes = random_tensor({D, L}, rng);
    return cb;
}

/// Exhaustive nearest-neighbor oracle over one fiber.
std::uint32_t brute_force_nearest(const double* fiber, const Codebook& cb) {
    const std::size_t D = cb.dim(), L = cb.count();
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t best_l = 0;
    for (std::size_t l = 0; l < L; ++l) {
        double dist = 0.0;
        for (std::size_t d = 0; d < D; ++d) {
            const double diff = fiber[d] - cb.entry(d, l);
            dist += diff * diff;
        }
        if (dist < best) {
            best = dist;
            best_l = static_cast<std::uint32_t>(l);
        }
    }
    return best_l;
}

void set_fiber(Tensor& e, std::size_t fiber, const std::vector<double>& v) {
    for (std::size_t d = 0; d < v.size(); ++d) e[fiber * v.size() + d] = v[d];
}

}  // namespace

TEST_SUITE("vq") {

TEST_CASE("exact codebook hit quantizes to that index") {
    std::mt19937_64 rng(401);
    const Codebook cb = random_codebook(4, 8, rng);
    Tensor e({1, 1, 1, 4});
    for (std::size_t d = 0; d < 4; ++d) e[d] = cb.entry(d, 3);
    const IndexGrid q = quantize(e, cb);
    CHECK(q.indices[0] == 3);
}

TEST_CASE("ties resolve to the lowest index") {
    Codebook cb(2, 8);
    cb.codes.fill(9.0);  // keep other codes far away
    // Codes 2 and 5 equidistant from the origin query.
    cb.codes[0 * 8 + 2] = 1.0;
    cb.codes[1 * 8 + 2] = 0.0;
    cb.codes[0 * 8 + 5] = -1.0;
    cb.codes[1 * 8 + 5] = 0.0;
    Tensor e({1, 1, 1, 2});
    const IndexGrid q = quantize(e, cb);
    CHECK(q.indices[0] == 2);
}

TEST_CASE("quantize matches exhaustive search on 1000 random fibers") {
    std::mt19937_64 rng(402);
    const Codebook cb = random_codebook(8, 64, rng);
    const Tensor e = random_tensor({10, 10, 10, 8}, rng);
    const IndexGrid q = quantize(e, cb);
    for (std::size_t i = 0; i < 1000; ++i)
        CHECK(q.indices[i] == brute_force_nearest(e.data() + i * 8, cb));
}

TEST_CASE("quantize is invariant under appending far-away codes") {
    std::mt19937_64 rng(403);
    const Codebook cb = random_codebook(4, 16, rng);
    const Tensor e = random_tensor({4, 3, 2, 4}, rng);
    const IndexGrid q = quantize(e, cb);

    Codebook extended(4, 20);
    for (std::size_t d = 0; d < 4; ++d) {
        for (std::size_t l = 0; l < 16; ++l)
            extended.codes[d * 20 + l] = cb.entry(d, l);
        for (std::size_t l = 16; l < 20; ++l)
            extended.codes[d * 20 + l] = 1e6 + static_cast<double>(l);
    }
    const IndexGrid q2 = quantize(e, extended);
    for (std::size_t i = 0; i < q.indices.size(); ++i) CHECK(q.indices[i] == q2.indices[i]);
}

TEST_CASE("dequantize looks up codebook columns") {
    std::mt19937_64 rng(404);
    const Codebook cb = random_codebook(5, 12, rng);

    IndexGrid q;
    q.shape = {2, 2, 2};
    q.indices.assign(8, 0);
    const Tensor e0 = dequantize(q, cb);
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t d = 0; d < 5; ++d) CHECK(e0[i * 5 + d] == cb.entry(d, 0));

    for (std::size_t i = 0; i < 8; ++i)
        q.indices[i] = static_cast<std::uint32_t>(uniform_index(rng, 12));
    const Tensor e = dequantize(q, cb);
    for (std::size_t i = 0; i < 8; ++i)
        for (std::size_t d = 0; d < 5; ++d) CHECK(e[i * 5 + d] == cb.entry(d, q.indices[i]));
}

TEST_CASE("dequantize-quantize round trip on codebook points") {
    std::mt19937_64 rng(405);
    const Codebook cb = random_codebook(3, 7, rng);
    Tensor e({7, 1, 1, 3});
    for (std::size_t l = 0; l < 7; ++l)
        for (std::size_t d = 0; d < 3; ++d) e[l * 3 + d] = cb.entry(d, l);
    const IndexGrid q = quantize(e, cb);
    const Tensor back = dequantize(q, cb);
    for (std::size_t i = 0; i < e.size(); ++i) CHECK(back[i] == e[i]);
}

TEST_CASE("dequantize rejects out-of-range indices") {
    std::mt19937_64 rng(406);
    const Codebook cb = random_codebook(3, 7, rng);
    IndexGrid q;
    q.shape = {1, 1, 1};
    q.indices = {7};
    CHECK_THROWS_AS(dequantize(q, cb), std::out_of_range);
}

TEST_CASE("straight-through backward is the identity") {
    std::mt19937_64 rng(407);
    const Tensor zero({2, 2, 2, 3});
    const Tensor g0 = straight_through_backward(zero);
    CHECK(max_abs(g0) == 0.0);

    const Tensor g = random_tensor({2, 2, 2, 3}, rng);
    const Tensor out = straight_through_backward(g);
    REQUIRE(out.same_shape(g));
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(out[i] == g[i]);
}

TEST_CASE("vq loss terms vanish on codebook points") {
    std::mt19937_64 rng(408);
    const Codebook cb = random_codebook(3, 5, rng);
    Tensor e({5, 1, 1, 3});
    for (std::size_t l = 0; l < 5; ++l)
        for (std::size_t d = 0; d < 3; ++d) e[l * 3 + d] = cb.entry(d, l);
    const IndexGrid q = quantize(e, cb);
    const VqLossTerms terms = vq_loss_terms(e, cb, q);
    CHECK(terms.codebook_loss == 0.0);
    CHECK(terms.commitment_loss == 0.0);
    CHECK(max_abs(terms.grad_codebook) == 0.0);
    CHECK(max_abs(terms.grad_encoder_output) == 0.0);
}

TEST_CASE("single-fiber loss values and gradients") {
    Codebook cb(2, 4);
    cb.codes.fill(5.0);
    cb.codes[0 * 4 + 0] = 0.0;  // code 0 = (0, 0)
    cb.codes[1 * 4 + 0] = 0.0;
    Tensor e({1, 1, 1, 2});
    set_fiber(e, 0, {1.0, 0.0});
    const IndexGrid q = quantize(e, cb);
    REQUIRE(q.indices[0] == 0);

    const VqLossTerms terms = vq_loss_terms(e, cb, q);
    CHECK(terms.codebook_loss == 1.0);
    CHECK(terms.commitment_loss == 1.0);
    CHECK(terms.grad_codebook[0 * 4 + 0] == -2.0);  // d/dc (c - e)^2 at c=0,e=1
    CHECK(terms.grad_codebook[1 * 4 + 0] == 0.0);
    CHECK(terms.grad_encoder_output[0] == 2.0);
    CHECK(terms.grad_encoder_output[1] == 0.0);
}

TEST_CASE("loss gradients match finite differences of frozen-assignment expressions") {
    std::mt19937_64 rng(409);
    Codebook cb = random_codebook(4, 6, rng);
    Tensor e = random_tensor({2, 2, 1, 4}, rng);
    const IndexGrid q = quantize(e, cb);
    const VqLossTerms terms = vq_loss_terms(e, cb, q);
    const Tensor e0 = e;
    const Tensor selected0 = dequantize(q, cb);
    const double h = 1e-6;

    // Codebook term with the encoder output held fixed.
    for (std::size_t i = 0; i < cb.codes.size(); ++i) {
        const auto eval = [&] {
            double s = 0.0;
            for (std::size_t fib = 0; fib < q.indices.size(); ++fib)
                for (std::size_t d = 0; d < 4; ++d) {
                    const double diff = e0[fib * 4 + d] - cb.entry(d, q.indices[fib]);
                    s += diff * diff;
                }
            return s;
        };
        const double orig = cb.codes[i];
        cb.codes[i] = orig + h;
        const double fp = eval();
        cb.codes[i] = orig - h;
        const double fm = eval();
        cb.codes[i] = orig;
        const double fd = (fp - fm) / (2.0 * h);
        CHECK(std::abs(terms.grad_codebook[i] - fd) <= 1e-7 * std::max(1.0, std::abs(fd)));
    }

    // Commitment term with the codes held fixed.
    for (std::size_t i = 0; i < e.size(); ++i) {
        const auto eval = [&] {
            double s = 0.0;
            for (std::size_t k = 0; k < e.size(); ++k) {
                const double diff = e[k] - selected0[k];
                s += diff * diff;
            }
            return s;
        };
        const double orig = e[i];
        e[i] = orig + h;
        const double fp = eval();
        e[i] = orig - h;
        const double fm = eval();
        e[i] = orig;
        const double fd = (fp - fm) / (2.0 * h);
        CHECK(std::abs(terms.grad_encoder_output[i] - fd) <=
              1e-7 * std::max(1.0, std::abs(fd)));
    }
}

TEST_CASE("codebook and commitment losses are equal scalars") {
    std::mt19937_64 rng(410);
    for (int trial = 0; trial < 10; ++trial) {
        const Codebook cb = random_codebook(6, 9, rng);
        const Tensor e = random_tensor({3, 2, 2, 6}, rng);
        const VqLossTerms terms = vq_loss_terms(e, cb, quantize(e, cb));
        CHECK(terms.codebook_loss == terms.commitment_loss);
    }
}

TEST_CASE("small codebook gradient step decreases the quantization error") {
    std::mt19937_64 rng(411);
    Codebook cb = random_codebook(4, 6, rng);
    const Tensor e = random_tensor({3, 3, 1, 4}, rng);
    const IndexGrid q = quantize(e, cb);
    const VqLossTerms terms = vq_loss_terms(e, cb, q);
    const double before = terms.codebook_loss;

    const double eta = 1e-3;
    for (std::size_t i = 0; i < cb.codes.size(); ++i)
        cb.codes[i] -= eta * terms.grad_codebook[i];
    // Same assignment, moved codes.
    const VqLossTerms after = vq_loss_terms(e, cb, q);
    CHECK(after.codebook_loss < before);
}

TEST_CASE("codebook utilization") {
    IndexGrid q;
    q.shape = {2, 2, 1};
    q.indices = {0, 0, 3, 3};
    CHECK(codebook_utilization(q, 8) == doctest::Approx(0.25));
    CHECK_THROWS_AS(codebook_utilization(q, 0), std::invalid_argument);
}

TEST_CASE("dimension mismatches are rejected") {
    std::mt19937_64 rng(412);
    const Codebook cb = random_codebook(4, 6, rng);
    CHECK_THROWS_AS(quantize(random_tensor({2, 2, 2, 3}, rng), cb), std::invalid_argument);
    IndexGrid q;
    q.shape = {2, 2, 2};
    q.indices.assign(7, 0);  // wrong count
    CHECK_THROWS_AS(dequantize(q, cb), std::invalid_argument);
}

}  // TEST_SUITE

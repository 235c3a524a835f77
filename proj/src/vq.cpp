#include "udic/vq.hpp"

#include <limits>
#include <stdexcept>

namespace udic {

namespace {

void check_fiber_tensor(const Tensor& e, const Codebook& cb) {
    if (e.rank() != 4)
        throw std::invalid_argument("vq: expected (n1, n2, n3, D) tensor");
    if (e.dim(3) != cb.dim())
        throw std::invalid_argument("vq: fiber dimension does not match codebook");
    if (cb.count() < 1 || cb.dim() < 1)
        throw std::invalid_argument("vq: codebook must be non-empty");
}

// Codes transposed to (L, D) for contiguous distance loops.
std::vector<double> transpose_codes(const Codebook& cb) {
    const std::size_t D = cb.dim(), L = cb.count();
    std::vector<double> t(L * D);
    for (std::size_t d = 0; d < D; ++d)
        for (std::size_t l = 0; l < L; ++l) t[l * D + d] = cb.codes[d * L + l];
    return t;
}

}  // namespace

IndexGrid quantize(const Tensor& e, const Codebook& cb) {
    check_fiber_tensor(e, cb);
    const std::size_t D = cb.dim(), L = cb.count();
    const std::size_t n_fibers = e.size() / D;
    const std::vector<double> codes = transpose_codes(cb);

    IndexGrid q;
    q.shape = {e.dim(0), e.dim(1), e.dim(2)};
    q.indices.resize(n_fibers);
    for (std::size_t i = 0; i < n_fibers; ++i) {
        const double* fiber = e.data() + i * D;
        double best = std::numeric_limits<double>::infinity();
        std::uint32_t best_l = 0;
        for (std::size_t l = 0; l < L; ++l) {
            const double* code = codes.data() + l * D;
            double dist = 0.0;
            for (std::size_t d = 0; d < D; ++d) {
                const double diff = fiber[d] - code[d];
                dist += diff * diff;
            }
            if (dist < best) {
                best = dist;
                best_l = static_cast<std::uint32_t>(l);
            }
        }
        q.indices[i] = best_l;
    }
    return q;
}

Tensor dequantize(const IndexGrid& q, const Codebook& cb) {
    const std::size_t D = cb.dim(), L = cb.count();
    const std::size_t n_fibers = q.shape[0] * q.shape[1] * q.shape[2];
    if (q.indices.size() != n_fibers)
        throw std::invalid_argument("dequantize: index count does not match grid shape");

    Tensor e({q.shape[0], q.shape[1], q.shape[2], D});
    for (std::size_t i = 0; i < n_fibers; ++i) {
        const std::uint32_t l = q.indices[i];
        if (l >= L) throw std::out_of_range("dequantize: index out of codebook range");
        double* fiber = e.data() + i * D;
        for (std::size_t d = 0; d < D; ++d) fiber[d] = cb.codes[d * L + l];
    }
    return e;
}

Tensor straight_through_backward(const Tensor& grad_wrt_e_tilde) {
    return grad_wrt_e_tilde;
}

VqLossTerms vq_loss_terms(const Tensor& e, const Codebook& cb, const IndexGrid& q) {
    check_fiber_tensor(e, cb);
    const std::size_t D = cb.dim(), L = cb.count();
    const std::size_t n_fibers = e.size() / D;
    if (q.indices.size() != n_fibers)
        throw std::invalid_argument("vq_loss_terms: index count does not match e");

    VqLossTerms terms;
    terms.grad_codebook = Tensor(cb.codes.shape());
    terms.grad_encoder_output = Tensor(e.shape());

    double loss = 0.0;
    for (std::size_t i = 0; i < n_fibers; ++i) {
        const std::uint32_t l = q.indices[i];
        if (l >= L) throw std::out_of_range("vq_loss_terms: index out of codebook range");
        const double* fiber = e.data() + i * D;
        double* ge = terms.grad_encoder_output.data() + i * D;
        for (std::size_t d = 0; d < D; ++d) {
            const double c = cb.codes[d * L + l];
            const double diff = fiber[d] - c;
            loss += diff * diff;
            terms.grad_codebook[d * L + l] += -2.0 * diff;  // d/dc |e - c|^2
            ge[d] = 2.0 * diff;                             // d/de |e - c|^2
        }
    }
    terms.codebook_loss = loss;
    terms.commitment_loss = loss;
    return terms;
}

double codebook_utilization(const IndexGrid& q, std::size_t codebook_size) {
    if (codebook_size == 0)
        throw std::invalid_argument("codebook_utilization: empty codebook");
    std::vector<std::uint8_t> used(codebook_size, 0);
    for (std::uint32_t l : q.indices) {
        if (l < codebook_size) used[l] = 1;
    }
    std::size_t n = 0;
    for (std::uint8_t u : used) n += u;
    return static_cast<double>(n) / static_cast<double>(codebook_size);
}

}  // namespace udic

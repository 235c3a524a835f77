#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "udic/tensor.hpp"

namespace udic {

/// Shared codebook C of L codes, each a D-vector; stored as a (D, L) matrix
/// whose columns are the codes. Indices are 0-based.
struct Codebook {
    Tensor codes;  // (D, L)

    Codebook() = default;
    Codebook(std::size_t dim, std::size_t count) : codes({dim, count}) {}

    std::size_t dim() const { return codes.dim(0); }    // D
    std::size_t count() const { return codes.dim(1); }  // L
    double entry(std::size_t d, std::size_t l) const { return codes[d * count() + l]; }
};

/// 3D grid of codebook indices, the transmitted latent code.
struct IndexGrid {
    std::array<std::size_t, 3> shape{0, 0, 0};
    std::vector<std::uint32_t> indices;  // row-major

    std::size_t size() const { return indices.size(); }
};

/// Nearest-neighbor search per fiber: q[i,j,k] = argmin_v |e[i,j,k,:] - c_v|.
/// Ties resolve to the lowest index. e has shape (n1, n2, n3, D).
IndexGrid quantize(const Tensor& e, const Codebook& cb);

/// Recovers feature maps from indices: output fiber (i,j,k) is code q[i,j,k].
Tensor dequantize(const IndexGrid& q, const Codebook& cb);

/// Straight-through estimator: the gradient at the decoder input is copied
/// unchanged to the encoder output.
Tensor straight_through_backward(const Tensor& grad_wrt_e_tilde);

/// Codebook and commitment terms of the VQ loss. Both evaluate to
/// sum_fibers |e - c_q|^2; they differ only in gradient routing: the codebook
/// term updates the selected codes, the commitment term updates the encoder
/// output.
struct VqLossTerms {
    double codebook_loss = 0.0;
    double commitment_loss = 0.0;
    Tensor grad_codebook;        // (D, L), from the codebook term
    Tensor grad_encoder_output;  // shape of e, from the commitment term
};

/// Requires q == quantize(e, cb); an inconsistent q is a caller error and
/// yields loss terms for the given assignment as-is.
VqLossTerms vq_loss_terms(const Tensor& e, const Codebook& cb, const IndexGrid& q);

/// Fraction of codebook entries referenced at least once.
double codebook_utilization(const IndexGrid& q, std::size_t codebook_size);

}  // namespace udic

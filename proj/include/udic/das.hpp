#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "udic/tensor.hpp"

namespace udic {

/// Precomputed fractional sample indices tau * f_samp for every
/// (pixel, source, receiver) triple, plus a validity mask. Entries whose
/// interpolation window does not fit inside [0, n_t - 1] are flagged invalid
/// and contribute nothing to the sum.
struct DelayTable {
    std::size_t n_x = 0, n_z = 0;
    std::size_t n_t = 0, n_s = 0, n_r = 0;
    std::vector<double> fractional_index;  // (n_pix, n_s, n_r) row-major
    std::vector<std::uint8_t> valid;       // same layout

    std::size_t n_pixels() const { return n_x * n_z; }
    std::size_t entry(std::size_t pixel, std::size_t s, std::size_t m) const {
        return (pixel * n_s + s) * n_r + m;
    }
};

/// Delay-and-sum image formation: u_i = sum_{s,m} f(tau_ism, s, m) with
/// linear interpolation at fractional delays. f has shape (n_t, n_s, n_r);
/// the result has shape (n_x, n_z).
Tensor das_forward(const Tensor& f, const DelayTable& table);

/// Exact transpose of das_forward: scatters each image value back into the
/// two interpolation samples of every valid (pixel, s, m) entry. u has shape
/// (n_x, n_z); the result has shape (n_t, n_s, n_r).
Tensor das_adjoint(const Tensor& u, const DelayTable& table);

/// Ratio between data element count and image element count, the lossless
/// linear compression bound for a full-row-rank imaging operator.
double theoretical_lossless_rate(const std::array<std::size_t, 3>& data_shape,
                                 const std::array<std::size_t, 2>& image_shape);

}  // namespace udic

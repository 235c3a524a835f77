#pragma once

#include <cstddef>

#include "udic/tensor.hpp"

namespace udic {

enum class SsimWindow { gaussian, uniform };

struct SsimConfig {
    SsimWindow window = SsimWindow::gaussian;
    std::size_t window_size = 11;
    double gaussian_sigma = 1.5;
    double k1 = 0.01;
    double k2 = 0.03;
    /// <= 0 derives the range from the joint min/max of both images, which
    /// keeps ssim(a, b) == ssim(b, a).
    double dynamic_range = 0.0;
};

/// Mean local structural similarity over sliding windows that fit fully
/// inside the image. Both images must have shape (n_x, n_z).
double ssim(const Tensor& a, const Tensor& b, const SsimConfig& cfg = {});

/// Mean squared difference.
double mse(const Tensor& a, const Tensor& b);

}  // namespace udic

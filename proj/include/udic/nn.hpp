#pragma once

#include <array>
#include <cstddef>
#include <utility>

#include "udic/tensor.hpp"

namespace udic {

/// 3D strided convolution ("same" zero padding of floor(k/2) per axis, output
/// length ceil(D/s)). Weights are (C_out, C_in, k1, k2, k3) with odd kernel
/// dims; optional weight standardization normalizes each output channel's
/// filter to zero mean / unit variance before use and is part of the
/// differentiated graph.
struct ConvLayer {
    Tensor weights;  // (C_out, C_in, k1, k2, k3)
    Tensor bias;     // (C_out)
    std::array<std::size_t, 3> stride{1, 1, 1};
    bool weight_standardization = false;
    double ws_eps = 1e-5;

    std::size_t out_channels() const { return weights.dim(0); }
    std::size_t in_channels() const { return weights.dim(1); }
};

struct Conv3dGrads {
    Tensor input;
    Tensor weights;
    Tensor bias;
};

/// Per-output-channel zero mean, unit variance (within eps) weights.
Tensor standardize_weights(const Tensor& weights, double eps);

Tensor conv3d_forward(const Tensor& x, const ConvLayer& layer);
Conv3dGrads conv3d_backward(const Tensor& grad_out, const Tensor& x, const ConvLayer& layer);

/// Group normalization over (channels-in-group x spatial) with per-channel
/// affine. Input is (C, D1, D2, D3); num_groups must divide C.
struct GroupNormLayer {
    std::size_t num_groups = 1;
    double eps = 1e-5;
    Tensor gamma;  // (C)
    Tensor beta;   // (C)
};

struct GroupNormGrads {
    Tensor input;
    Tensor gamma;
    Tensor beta;
};

Tensor group_norm_forward(const Tensor& x, const GroupNormLayer& layer);
GroupNormGrads group_norm_backward(const Tensor& grad_out, const Tensor& x,
                                   const GroupNormLayer& layer);

enum class Activation { relu, tanh };

Tensor activation_forward(const Tensor& x, Activation kind);
/// Multiplies by the elementwise derivative; the ReLU derivative at 0 is 0.
Tensor activation_backward(const Tensor& grad_out, const Tensor& x, Activation kind);

/// Nearest-neighbor repetition along the three spatial axes of a
/// (C, D1, D2, D3) tensor.
Tensor upsample_nearest_forward(const Tensor& x, const std::array<std::size_t, 3>& factors);
Tensor upsample_nearest_backward(const Tensor& grad_out,
                                 const std::array<std::size_t, 4>& input_shape,
                                 const std::array<std::size_t, 3>& factors);

Tensor residual_add_forward(const Tensor& x, const Tensor& y);
std::pair<Tensor, Tensor> residual_add_backward(const Tensor& grad_out);

/// Keeps the leading target_shape entries per axis (channels unchanged).
Tensor crop_to(const Tensor& x, const std::array<std::size_t, 4>& target_shape);
/// Zero-pads the gradient back to the pre-crop shape.
Tensor crop_backward(const Tensor& grad_out, const std::array<std::size_t, 4>& input_shape);

}  // namespace udic

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "udic/das.hpp"
#include "udic/nn.hpp"
#include "udic/tensor.hpp"
#include "udic/vq.hpp"

namespace udic {

/// One encoder stage: strided conv -> group norm -> relu, optionally wrapped
/// in a residual add (requires stride 1 and unchanged channel count).
struct LayerSpec {
    std::size_t filters = 0;
    std::array<std::size_t, 3> stride{1, 1, 1};
    bool weight_standardization = true;
    bool residual = false;
};

struct ModelConfig {
    std::array<std::size_t, 3> data_shape{0, 0, 0};  // (n_t, n_s, n_r)
    std::vector<LayerSpec> encoder;                  // decoder mirrors this stack
    std::size_t bottleneck_channels = 16;            // D; must equal last encoder filters
    std::size_t codebook_size = 32;                  // L
    std::size_t norm_groups = 8;
    std::size_t kernel_size = 5;                     // per-axis; must be odd
    double groupnorm_eps = 1e-5;
    double ws_eps = 1e-5;
};

/// All intermediate shapes implied by a config, computed up front so invalid
/// configs are rejected before any allocation.
struct ShapePlan {
    std::vector<std::array<std::size_t, 4>> encoder_shapes;  // [0] = input (1, n_t, n_s, n_r)
    std::array<std::size_t, 4> code_shape{};                 // (D, n1, n2, n3)
    std::vector<std::array<std::size_t, 4>> decoder_shapes;  // post-layer, pre-crop
    std::array<std::size_t, 3> crop{};                       // trailing overshoot trimmed
};

ShapePlan validate_config(const ModelConfig& cfg);  // throws std::invalid_argument

/// Conv (+ optional preceding upsample) followed by an optional group norm
/// and an activation; `residual` adds the stage input to the stage output.
struct LayerParams {
    ConvLayer conv;
    GroupNormLayer norm;
    bool has_norm = true;
    Activation act = Activation::relu;
    std::array<std::size_t, 3> upsample{1, 1, 1};
    bool residual = false;
};

struct Model {
    ModelConfig config;
    ShapePlan plan;
    std::vector<LayerParams> encoder;
    std::vector<LayerParams> decoder;
    Codebook codebook;
    double data_scale = 1.0;
    std::uint64_t init_seed = 0;

    std::array<std::size_t, 3> code_grid() const {
        return {plan.code_shape[1], plan.code_shape[2], plan.code_shape[3]};
    }
};

/// Uniform +-sqrt(6/(fan_in+fan_out)) conv weights, zero bias, unit/zero
/// group norm affine, codebook uniform on [-1/L, 1/L].
Model init_model(const ModelConfig& cfg, std::uint64_t seed);

/// Cached activations of one stack pass, consumed by the matching backward.
struct StackTrace {
    std::vector<Tensor> layer_input;  // stage input (pre-upsample)
    std::vector<Tensor> conv_input;   // post-upsample
    std::vector<Tensor> conv_output;  // pre-norm
    std::vector<Tensor> norm_output;  // pre-activation
};

Tensor stack_forward(const std::vector<LayerParams>& layers, const Tensor& input,
                     StackTrace* trace);
/// Accumulates parameter gradients into `grads` (same layer order) and
/// returns the gradient with respect to the stack input.
struct LayerGrads {
    Tensor weights, bias, gamma, beta;
};
Tensor stack_backward(const std::vector<LayerParams>& layers, const StackTrace& trace,
                      const Tensor& grad_output, std::vector<LayerGrads>& grads);

std::vector<LayerGrads> zero_layer_grads(const std::vector<LayerParams>& layers);

/// (C, a, b, c) -> (a, b, c, C) and back; exact permutation copies.
Tensor channels_last(const Tensor& x);
Tensor channels_first(const Tensor& x);

/// Encoder pass on normalized data (n_t, n_s, n_r); returns the channels-last
/// feature tensor (n1, n2, n3, D).
Tensor encode(const Model& model, const Tensor& f, StackTrace* trace = nullptr);

/// Decoder pass from channels-last features back to a (n_t, n_s, n_r) tensor
/// with values in (-1, 1); the uncropped stack shape is plan.decoder_shapes.back().
Tensor decode(const Model& model, const Tensor& e_tilde, StackTrace* trace = nullptr);

/// Element-count compression rate data/(code grid), matching index-count
/// accounting.
double compression_rate(const std::array<std::size_t, 3>& data_shape,
                        const std::array<std::size_t, 3>& code_shape);

struct PipelineTrace {
    StackTrace encoder;
    Tensor encoder_output;    // channels-last e
    IndexGrid quantized;
    Tensor decoder_input;     // channels-last e~
    StackTrace decoder;
    Tensor reconstruction;    // (n_t, n_s, n_r)
};

struct PipelineResult {
    Tensor image;  // (n_x, n_z)
};

/// Full data-to-image pass u_hat = B D(Q_up(Q_down(E(f)))).
PipelineResult forward_data_to_image(const Model& model, const Tensor& f,
                                     const DelayTable& table,
                                     PipelineTrace* trace = nullptr);

struct ModelGrads {
    std::vector<LayerGrads> encoder, decoder;
    Tensor codebook;
};

ModelGrads zero_model_grads(const Model& model);

/// Parameter tensors in a fixed traversal order (encoder, decoder, codebook);
/// the ModelGrads overloads yield the matching gradient tensors.
std::vector<Tensor*> parameter_tensors(Model& model);
std::vector<Tensor*> parameter_tensors(ModelGrads& grads);
std::vector<const Tensor*> parameter_tensors(const Model& model);
std::vector<const Tensor*> parameter_tensors(const ModelGrads& grads);

}  // namespace udic

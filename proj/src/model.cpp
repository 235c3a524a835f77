#include "udic/model.hpp"

#include <cmath>
#include <stdexcept>

#include "udic/rng.hpp"

namespace udic {

namespace {

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

std::vector<std::size_t> channel_sequence(const ModelConfig& cfg) {
    std::vector<std::size_t> c;
    c.push_back(1);  // raw data enters as a single channel
    for (const LayerSpec& l : cfg.encoder) c.push_back(l.filters);
    return c;
}

}  // namespace

ShapePlan validate_config(const ModelConfig& cfg) {
    for (std::size_t d : cfg.data_shape)
        if (d == 0) throw std::invalid_argument("model: data_shape has a zero dimension");
    if (cfg.encoder.empty())
        throw std::invalid_argument("model: encoder needs at least one layer");
    if (cfg.codebook_size < 1)
        throw std::invalid_argument("model: codebook_size must be >= 1");
    if (cfg.norm_groups < 1)
        throw std::invalid_argument("model: norm_groups must be >= 1");
    if (cfg.encoder.back().filters != cfg.bottleneck_channels)
        throw std::invalid_argument(
            "model: last encoder layer must have bottleneck_channels filters");
    if (cfg.kernel_size % 2 == 0 || cfg.kernel_size < 1)
        throw std::invalid_argument("model: kernel_size must be odd");

    ShapePlan plan;
    std::array<std::size_t, 4> shape{1, cfg.data_shape[0], cfg.data_shape[1],
                                     cfg.data_shape[2]};
    plan.encoder_shapes.push_back(shape);

    const std::vector<std::size_t> channels = channel_sequence(cfg);
    for (std::size_t i = 0; i < cfg.encoder.size(); ++i) {
        const LayerSpec& l = cfg.encoder[i];
        if (l.filters < 1)
            throw std::invalid_argument("model: layer filter count must be >= 1");
        if (l.filters % cfg.norm_groups != 0)
            throw std::invalid_argument("model: norm_groups must divide every layer's filters");
        for (std::size_t s : l.stride)
            if (s < 1) throw std::invalid_argument("model: stride must be >= 1");
        if (l.residual) {
            const bool unit_stride =
                l.stride[0] == 1 && l.stride[1] == 1 && l.stride[2] == 1;
            if (!unit_stride || channels[i] != l.filters)
                throw std::invalid_argument(
                    "model: residual layers need stride 1 and unchanged channel count");
        }
        shape[0] = l.filters;
        for (std::size_t a = 0; a < 3; ++a)
            shape[1 + a] = ceil_div(shape[1 + a], l.stride[a]);
        plan.encoder_shapes.push_back(shape);
    }
    plan.code_shape = shape;

    // Decoder mirrors the encoder: upsample by the mirrored stride, conv to
    // the mirrored input channel count, final crop absorbs ceil-division
    // overshoot.
    const std::size_t n = cfg.encoder.size();
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t i = n - 1 - j;  // mirrored encoder layer
        shape[0] = channels[i];
        for (std::size_t a = 0; a < 3; ++a) shape[1 + a] *= cfg.encoder[i].stride[a];
        plan.decoder_shapes.push_back(shape);
    }
    for (std::size_t a = 0; a < 3; ++a) {
        if (shape[1 + a] < cfg.data_shape[a])
            throw std::invalid_argument("model: decoder cannot restore the data shape");
        plan.crop[a] = shape[1 + a] - cfg.data_shape[a];
    }
    return plan;
}

namespace {

ConvLayer make_conv(std::size_t c_out, std::size_t c_in, std::size_t kernel,
                    const std::array<std::size_t, 3>& stride, bool ws, double ws_eps,
                    std::mt19937_64& rng) {
    ConvLayer conv;
    conv.weights = Tensor({c_out, c_in, kernel, kernel, kernel});
    conv.bias = Tensor({c_out});
    conv.stride = stride;
    conv.weight_standardization = ws;
    conv.ws_eps = ws_eps;
    const double fan_in = static_cast<double>(c_in * kernel * kernel * kernel);
    const double fan_out = static_cast<double>(c_out * kernel * kernel * kernel);
    const double bound = std::sqrt(6.0 / (fan_in + fan_out));
    for (std::size_t i = 0; i < conv.weights.size(); ++i)
        conv.weights[i] = uniform(rng, -bound, bound);
    return conv;
}

GroupNormLayer make_norm(std::size_t channels, std::size_t groups, double eps) {
    GroupNormLayer norm;
    norm.num_groups = groups;
    norm.eps = eps;
    norm.gamma = Tensor({channels});
    norm.gamma.fill(1.0);
    norm.beta = Tensor({channels});
    return norm;
}

}  // namespace

Model init_model(const ModelConfig& cfg, std::uint64_t seed) {
    Model model;
    model.config = cfg;
    model.plan = validate_config(cfg);
    model.init_seed = seed;

    std::mt19937_64 rng(seed);
    const std::vector<std::size_t> channels = channel_sequence(cfg);
    const std::size_t n = cfg.encoder.size();

    for (std::size_t i = 0; i < n; ++i) {
        const LayerSpec& spec = cfg.encoder[i];
        LayerParams layer;
        layer.conv = make_conv(spec.filters, channels[i], cfg.kernel_size, spec.stride,
                               spec.weight_standardization, cfg.ws_eps, rng);
        layer.norm = make_norm(spec.filters, cfg.norm_groups, cfg.groupnorm_eps);
        layer.has_norm = true;
        layer.act = Activation::relu;
        layer.residual = spec.residual;
        model.encoder.push_back(std::move(layer));
    }

    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t i = n - 1 - j;
        const LayerSpec& spec = cfg.encoder[i];
        const bool last = (j == n - 1);
        LayerParams layer;
        // No norm follows the final conv, so standardized (unit-variance)
        // weights there would blow up the pre-tanh scale.
        layer.conv = make_conv(channels[i], channels[i + 1], cfg.kernel_size, {1, 1, 1},
                               spec.weight_standardization && !last, cfg.ws_eps, rng);
        layer.upsample = spec.stride;
        if (last) {
            layer.has_norm = false;
            layer.act = Activation::tanh;
        } else {
            layer.norm = make_norm(channels[i], cfg.norm_groups, cfg.groupnorm_eps);
            layer.has_norm = true;
            layer.act = Activation::relu;
        }
        layer.residual = spec.residual;
        model.decoder.push_back(std::move(layer));
    }

    model.codebook = Codebook(cfg.bottleneck_channels, cfg.codebook_size);
    const double bound = 1.0 / static_cast<double>(cfg.codebook_size);
    for (std::size_t i = 0; i < model.codebook.codes.size(); ++i)
        model.codebook.codes[i] = uniform(rng, -bound, bound);

    return model;
}

Tensor stack_forward(const std::vector<LayerParams>& layers, const Tensor& input,
                     StackTrace* trace) {
    Tensor cur = input;
    for (const LayerParams& layer : layers) {
        if (trace) trace->layer_input.push_back(cur);
        Tensor u = (layer.upsample[0] == 1 && layer.upsample[1] == 1 && layer.upsample[2] == 1)
                       ? cur
                       : upsample_nearest_forward(cur, layer.upsample);
        if (trace) trace->conv_input.push_back(u);
        Tensor y = conv3d_forward(u, layer.conv);
        if (trace) trace->conv_output.push_back(y);
        Tensor z = layer.has_norm ? group_norm_forward(y, layer.norm) : std::move(y);
        if (trace) trace->norm_output.push_back(z);
        Tensor a = activation_forward(z, layer.act);
        cur = layer.residual ? residual_add_forward(a, cur) : std::move(a);
    }
    return cur;
}

std::vector<LayerGrads> zero_layer_grads(const std::vector<LayerParams>& layers) {
    std::vector<LayerGrads> grads;
    grads.reserve(layers.size());
    for (const LayerParams& layer : layers) {
        LayerGrads g;
        g.weights = Tensor(layer.conv.weights.shape());
        g.bias = Tensor(layer.conv.bias.shape());
        if (layer.has_norm) {
            g.gamma = Tensor(layer.norm.gamma.shape());
            g.beta = Tensor(layer.norm.beta.shape());
        }
        grads.push_back(std::move(g));
    }
    return grads;
}

Tensor stack_backward(const std::vector<LayerParams>& layers, const StackTrace& trace,
                      const Tensor& grad_output, std::vector<LayerGrads>& grads) {
    if (grads.size() != layers.size())
        throw std::invalid_argument("stack_backward: gradient buffer count mismatch");

    Tensor g = grad_output;
    for (std::size_t idx = layers.size(); idx-- > 0;) {
        const LayerParams& layer = layers[idx];
        Tensor g_residual;
        if (layer.residual) {
            auto [g_branch, g_skip] = residual_add_backward(g);
            g = std::move(g_branch);
            g_residual = std::move(g_skip);
        }
        Tensor g_z = activation_backward(g, trace.norm_output[idx], layer.act);
        Tensor g_y;
        if (layer.has_norm) {
            GroupNormGrads ng = group_norm_backward(g_z, trace.conv_output[idx], layer.norm);
            grads[idx].gamma += ng.gamma;
            grads[idx].beta += ng.beta;
            g_y = std::move(ng.input);
        } else {
            g_y = std::move(g_z);
        }
        Conv3dGrads cg = conv3d_backward(g_y, trace.conv_input[idx], layer.conv);
        grads[idx].weights += cg.weights;
        grads[idx].bias += cg.bias;
        Tensor g_in;
        if (layer.upsample[0] == 1 && layer.upsample[1] == 1 && layer.upsample[2] == 1) {
            g_in = std::move(cg.input);
        } else {
            const Tensor& in = trace.layer_input[idx];
            g_in = upsample_nearest_backward(
                cg.input, {in.dim(0), in.dim(1), in.dim(2), in.dim(3)}, layer.upsample);
        }
        if (layer.residual) g_in += g_residual;
        g = std::move(g_in);
    }
    return g;
}

Tensor channels_last(const Tensor& x) {
    if (x.rank() != 4)
        throw std::invalid_argument("channels_last: expected rank-4 tensor");
    const std::size_t C = x.dim(0), a = x.dim(1), b = x.dim(2), c = x.dim(3);
    Tensor y({a, b, c, C});
    for (std::size_t ch = 0; ch < C; ++ch) {
        const double* xc = x.data() + ch * a * b * c;
        for (std::size_t i = 0; i < a * b * c; ++i) y[i * C + ch] = xc[i];
    }
    return y;
}

Tensor channels_first(const Tensor& x) {
    if (x.rank() != 4)
        throw std::invalid_argument("channels_first: expected rank-4 tensor");
    const std::size_t a = x.dim(0), b = x.dim(1), c = x.dim(2), C = x.dim(3);
    Tensor y({C, a, b, c});
    for (std::size_t ch = 0; ch < C; ++ch) {
        double* yc = y.data() + ch * a * b * c;
        for (std::size_t i = 0; i < a * b * c; ++i) yc[i] = x[i * C + ch];
    }
    return y;
}

Tensor encode(const Model& model, const Tensor& f, StackTrace* trace) {
    const auto& ds = model.config.data_shape;
    if (f.rank() != 3 || f.dim(0) != ds[0] || f.dim(1) != ds[1] || f.dim(2) != ds[2])
        throw std::invalid_argument("encode: data shape does not match model config");
    StackTrace local;
    StackTrace* tr = trace ? trace : &local;
    Tensor out = stack_forward(model.encoder, f.reshaped({1, ds[0], ds[1], ds[2]}), tr);
    return channels_last(out);
}

Tensor decode(const Model& model, const Tensor& e_tilde, StackTrace* trace) {
    const auto& cs = model.plan.code_shape;
    if (e_tilde.rank() != 4 || e_tilde.dim(0) != cs[1] || e_tilde.dim(1) != cs[2] ||
        e_tilde.dim(2) != cs[3] || e_tilde.dim(3) != cs[0])
        throw std::invalid_argument("decode: feature shape does not match bottleneck");
    StackTrace local;
    StackTrace* tr = trace ? trace : &local;
    Tensor out = stack_forward(model.decoder, channels_first(e_tilde), tr);
    const auto& ds = model.config.data_shape;
    out = crop_to(out, {1, ds[0], ds[1], ds[2]});
    return out.reshaped({ds[0], ds[1], ds[2]});
}

double compression_rate(const std::array<std::size_t, 3>& data_shape,
                        const std::array<std::size_t, 3>& code_shape) {
    for (std::size_t d : data_shape)
        if (d == 0) throw std::invalid_argument("compression_rate: zero data dimension");
    for (std::size_t d : code_shape)
        if (d == 0) throw std::invalid_argument("compression_rate: zero code dimension");
    const double data_elems = static_cast<double>(data_shape[0]) *
                              static_cast<double>(data_shape[1]) *
                              static_cast<double>(data_shape[2]);
    const double code_elems = static_cast<double>(code_shape[0]) *
                              static_cast<double>(code_shape[1]) *
                              static_cast<double>(code_shape[2]);
    return data_elems / code_elems;
}

PipelineResult forward_data_to_image(const Model& model, const Tensor& f,
                                     const DelayTable& table, PipelineTrace* trace) {
    PipelineTrace local;
    PipelineTrace* tr = trace ? trace : &local;
    tr->encoder_output = encode(model, f, &tr->encoder);
    tr->quantized = quantize(tr->encoder_output, model.codebook);
    tr->decoder_input = dequantize(tr->quantized, model.codebook);
    tr->reconstruction = decode(model, tr->decoder_input, &tr->decoder);
    PipelineResult result;
    result.image = das_forward(tr->reconstruction, table);
    return result;
}

ModelGrads zero_model_grads(const Model& model) {
    ModelGrads g;
    g.encoder = zero_layer_grads(model.encoder);
    g.decoder = zero_layer_grads(model.decoder);
    g.codebook = Tensor(model.codebook.codes.shape());
    return g;
}

namespace {

template <class ModelT, class TensorPtr>
void collect_params(ModelT& model, std::vector<TensorPtr>& out) {
    for (auto& layer : model.encoder) {
        out.push_back(&layer.conv.weights);
        out.push_back(&layer.conv.bias);
        if (layer.has_norm) {
            out.push_back(&layer.norm.gamma);
            out.push_back(&layer.norm.beta);
        }
    }
    for (auto& layer : model.decoder) {
        out.push_back(&layer.conv.weights);
        out.push_back(&layer.conv.bias);
        if (layer.has_norm) {
            out.push_back(&layer.norm.gamma);
            out.push_back(&layer.norm.beta);
        }
    }
    out.push_back(&model.codebook.codes);
}

}  // namespace

std::vector<Tensor*> parameter_tensors(Model& model) {
    std::vector<Tensor*> out;
    collect_params(model, out);
    return out;
}

std::vector<const Tensor*> parameter_tensors(const Model& model) {
    std::vector<const Tensor*> out;
    collect_params(model, out);
    return out;
}

namespace {

template <class GradsT, class TensorPtr>
void collect_grads(GradsT& grads, std::vector<TensorPtr>& out) {
    for (auto& layer : grads.encoder) {
        out.push_back(&layer.weights);
        out.push_back(&layer.bias);
        if (layer.gamma.size() > 0) {
            out.push_back(&layer.gamma);
            out.push_back(&layer.beta);
        }
    }
    for (auto& layer : grads.decoder) {
        out.push_back(&layer.weights);
        out.push_back(&layer.bias);
        if (layer.gamma.size() > 0) {
            out.push_back(&layer.gamma);
            out.push_back(&layer.beta);
        }
    }
    out.push_back(&grads.codebook);
}

}  // namespace

std::vector<Tensor*> parameter_tensors(ModelGrads& grads) {
    std::vector<Tensor*> out;
    collect_grads(grads, out);
    return out;
}

std::vector<const Tensor*> parameter_tensors(const ModelGrads& grads) {
    std::vector<const Tensor*> out;
    collect_grads(grads, out);
    return out;
}

}  // namespace udic

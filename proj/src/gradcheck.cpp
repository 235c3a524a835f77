#include "udic/gradcheck.hpp"

#include <cmath>
#include <functional>
#include <random>

#include "udic/das.hpp"
#include "udic/model.hpp"
#include "udic/training.hpp"
#include "udic/nn.hpp"
#include "udic/rng.hpp"
#include "udic/tensor.hpp"
#include "udic/vq.hpp"

namespace udic {

namespace {

double rel_err(double analytic, double fd) {
    const double denom = std::max({1.0, std::abs(analytic), std::abs(fd)});
    return std::abs(analytic - fd) / denom;
}

/// Max scaled-relative error between the analytic gradient of `target` and
/// central differences of `eval` over every coordinate of `target`.
double fd_check(Tensor& target, const Tensor& analytic,
                const std::function<double()>& eval, double h) {
    double worst = 0.0;
    for (std::size_t i = 0; i < target.size(); ++i) {
        const double orig = target[i];
        target[i] = orig + h;
        const double fp = eval();
        target[i] = orig - h;
        const double fm = eval();
        target[i] = orig;
        const double fd = (fp - fm) / (2.0 * h);
        worst = std::max(worst, rel_err(analytic[i], fd));
    }
    return worst;
}

Tensor random_tensor(std::vector<std::size_t> shape, std::mt19937_64& rng, double lo = -1.0,
                     double hi = 1.0) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = uniform(rng, lo, hi);
    return t;
}

/// Random values bounded away from 0 so FD never straddles the ReLU kink.
Tensor random_tensor_off_kink(std::vector<std::size_t> shape, std::mt19937_64& rng) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) {
        const double mag = uniform(rng, 0.1, 1.0);
        t[i] = uniform_unit(rng) < 0.5 ? -mag : mag;
    }
    return t;
}

DelayTable random_table(std::size_t n_x, std::size_t n_z, std::size_t n_t, std::size_t n_e,
                        std::mt19937_64& rng, double invalid_fraction = 0.1) {
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
        table.fractional_index[i] = uniform(rng, 0.0, static_cast<double>(n_t) - 1.1);
        table.valid[i] = uniform_unit(rng) < invalid_fraction ? 0 : 1;
    }
    return table;
}

struct Check {
    std::string name;
    std::function<double(std::mt19937_64&, double)> run;  // returns max rel err
};

double check_conv(std::mt19937_64& rng, double h, bool weight_standardization) {
    Tensor x = random_tensor({2, 5, 4, 3}, rng);
    ConvLayer layer;
    layer.weights = random_tensor({3, 2, 3, 3, 3}, rng);
    layer.bias = random_tensor({3}, rng);
    layer.stride = {2, 1, 2};
    layer.weight_standardization = weight_standardization;
    Tensor probe = random_tensor(conv3d_forward(x, layer).shape(), rng);

    const auto eval = [&] { return dot(conv3d_forward(x, layer), probe); };
    const Conv3dGrads g = conv3d_backward(probe, x, layer);
    double worst = fd_check(x, g.input, eval, h);
    worst = std::max(worst, fd_check(layer.weights, g.weights, eval, h));
    worst = std::max(worst, fd_check(layer.bias, g.bias, eval, h));
    return worst;
}

double check_group_norm(std::mt19937_64& rng, double h) {
    Tensor x = random_tensor({4, 3, 2, 2}, rng);
    GroupNormLayer layer;
    layer.num_groups = 2;
    layer.eps = 1e-5;
    layer.gamma = random_tensor({4}, rng, 0.5, 1.5);
    layer.beta = random_tensor({4}, rng);
    Tensor probe = random_tensor(x.shape(), rng);

    const auto eval = [&] { return dot(group_norm_forward(x, layer), probe); };
    const GroupNormGrads g = group_norm_backward(probe, x, layer);
    double worst = fd_check(x, g.input, eval, h);
    worst = std::max(worst, fd_check(layer.gamma, g.gamma, eval, h));
    worst = std::max(worst, fd_check(layer.beta, g.beta, eval, h));
    return worst;
}

double check_activation(std::mt19937_64& rng, double h, Activation kind) {
    Tensor x = kind == Activation::relu ? random_tensor_off_kink({2, 3, 2, 2}, rng)
                                        : random_tensor({2, 3, 2, 2}, rng, -2.0, 2.0);
    Tensor probe = random_tensor(x.shape(), rng);
    const auto eval = [&] { return dot(activation_forward(x, kind), probe); };
    const Tensor g = activation_backward(probe, x, kind);
    return fd_check(x, g, eval, h);
}

double check_upsample(std::mt19937_64& rng, double h) {
    Tensor x = random_tensor({2, 2, 3, 2}, rng);
    const std::array<std::size_t, 3> factors{2, 1, 3};
    Tensor probe = random_tensor(upsample_nearest_forward(x, factors).shape(), rng);
    const auto eval = [&] { return dot(upsample_nearest_forward(x, factors), probe); };
    const Tensor g = upsample_nearest_backward(
        probe, {x.dim(0), x.dim(1), x.dim(2), x.dim(3)}, factors);
    return fd_check(x, g, eval, h);
}

double check_residual_block(std::mt19937_64& rng, double h) {
    // conv-gn-relu stage followed by a residual conv-gn-relu stage.
    std::vector<LayerParams> layers(2);
    for (std::size_t i = 0; i < 2; ++i) {
        layers[i].conv.weights = random_tensor({4, 4, 3, 3, 3}, rng, -0.3, 0.3);
        layers[i].conv.bias = random_tensor({4}, rng, -0.2, 0.2);
        layers[i].conv.stride = {1, 1, 1};
        layers[i].conv.weight_standardization = (i == 0);
        layers[i].norm.num_groups = 2;
        layers[i].norm.gamma = random_tensor({4}, rng, 0.5, 1.5);
        layers[i].norm.beta = random_tensor({4}, rng, -0.2, 0.2);
        layers[i].has_norm = true;
        layers[i].act = Activation::relu;
    }
    layers[1].residual = true;
    Tensor x = random_tensor({4, 3, 2, 2}, rng);

    StackTrace trace;
    Tensor out = stack_forward(layers, x, &trace);
    Tensor probe = random_tensor(out.shape(), rng);

    const auto eval = [&] { return dot(stack_forward(layers, x, nullptr), probe); };

    std::vector<LayerGrads> grads = zero_layer_grads(layers);
    StackTrace trace2;
    stack_forward(layers, x, &trace2);
    Tensor gx = stack_backward(layers, trace2, probe, grads);

    double worst = fd_check(x, gx, eval, h);
    for (std::size_t i = 0; i < 2; ++i) {
        worst = std::max(worst, fd_check(layers[i].conv.weights, grads[i].weights, eval, h));
        worst = std::max(worst, fd_check(layers[i].conv.bias, grads[i].bias, eval, h));
        worst = std::max(worst, fd_check(layers[i].norm.gamma, grads[i].gamma, eval, h));
        worst = std::max(worst, fd_check(layers[i].norm.beta, grads[i].beta, eval, h));
    }
    return worst;
}

double check_vq_terms(std::mt19937_64& rng, double h) {
    Tensor e = random_tensor({2, 2, 1, 4}, rng);
    Codebook cb(4, 6);
    cb.codes = random_tensor({4, 6}, rng);
    const IndexGrid q = quantize(e, cb);
    const VqLossTerms terms = vq_loss_terms(e, cb, q);

    // Independently coded expressions with the assignment frozen: the
    // codebook term sees a constant encoder output, the commitment term sees
    // constant codes.
    const Tensor e0 = e;
    const Tensor selected0 = dequantize(q, cb);
    const std::size_t D = cb.dim(), L = cb.count();

    const auto eval_codebook = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < q.indices.size(); ++i)
            for (std::size_t d = 0; d < D; ++d) {
                const double diff = e0[i * D + d] - cb.codes[d * L + q.indices[i]];
                s += diff * diff;
            }
        return s;
    };
    const auto eval_commitment = [&] {
        double s = 0.0;
        for (std::size_t i = 0; i < e.size(); ++i) {
            const double diff = e[i] - selected0[i];
            s += diff * diff;
        }
        return s;
    };

    double worst = fd_check(cb.codes, terms.grad_codebook, eval_codebook, h);
    worst = std::max(worst, fd_check(e, terms.grad_encoder_output, eval_commitment, h));
    return worst;
}

double check_das_layer(std::mt19937_64& rng, double h) {
    const DelayTable table = random_table(4, 3, 16, 3, rng);
    Tensor f = random_tensor({16, 3, 3}, rng);
    Tensor probe = random_tensor({4, 3}, rng);
    const auto eval = [&] { return dot(das_forward(f, table), probe); };
    const Tensor g = das_adjoint(probe, table);
    return fd_check(f, g, eval, h);
}

/// data_to_image checks the full pipeline including the DAS layer;
/// data_to_data drops DAS and compares in the data domain.
double check_composed_loss(std::mt19937_64& rng, double h, bool data_to_image) {
    ModelConfig cfg;
    cfg.data_shape = {16, 3, 3};
    cfg.encoder = {LayerSpec{4, {2, 1, 1}, true, false}, LayerSpec{4, {2, 1, 1}, false, false}};
    cfg.bottleneck_channels = 4;
    cfg.codebook_size = 5;
    cfg.norm_groups = 2;
    cfg.kernel_size = 3;
    Model model = init_model(cfg, rng());

    const DelayTable table = random_table(4, 3, 16, 3, rng);
    const Tensor f = random_tensor({16, 3, 3}, rng);
    const Tensor u = random_tensor({4, 3}, rng, -0.5, 0.5);
    const double w_cb = 0.7, w_cm = 0.9;

    // Frozen bottleneck state: the surrogate the backward pass actually
    // differentiates holds the assignment, the quantization offset, and each
    // stop-gradient operand at their unperturbed values.
    const Tensor e0 = encode(model, f);
    const IndexGrid q0 = quantize(e0, model.codebook);
    const Tensor selected0 = dequantize(q0, model.codebook);
    Tensor delta0 = selected0;
    delta0 -= e0;

    const std::size_t D = model.codebook.dim(), L = model.codebook.count();
    const auto eval = [&] {
        const Tensor e = encode(model, f);
        Tensor e_tilde = e;
        e_tilde += delta0;
        const Tensor f_tilde = decode(model, e_tilde);
        Tensor r = data_to_image ? das_forward(f_tilde, table) : f_tilde;
        r -= data_to_image ? u : f;
        double loss = sum_squares(r);
        double cb_term = 0.0;
        for (std::size_t i = 0; i < q0.indices.size(); ++i)
            for (std::size_t d = 0; d < D; ++d) {
                const double diff = e0[i * D + d] - model.codebook.codes[d * L + q0.indices[i]];
                cb_term += diff * diff;
            }
        double cm_term = 0.0;
        for (std::size_t i = 0; i < e.size(); ++i) {
            const double diff = e[i] - selected0[i];
            cm_term += diff * diff;
        }
        return loss + w_cb * cb_term + w_cm * cm_term;
    };

    // Analytic gradients via the production backward path.
    ModelGrads grads = zero_model_grads(model);
    if (data_to_image)
        loss_data_to_image(f, u, model, table, w_cb, w_cm, &grads);
    else
        loss_data_to_data(f, model, w_cb, w_cm, &grads);

    std::vector<Tensor*> params = parameter_tensors(model);
    std::vector<Tensor*> grad_tensors = parameter_tensors(grads);
    double worst = 0.0;
    for (std::size_t t = 0; t < params.size(); ++t)
        worst = std::max(worst, fd_check(*params[t], *grad_tensors[t], eval, h));
    return worst;
}

}  // namespace

std::vector<GradCheckResult> run_gradient_suite(std::uint64_t seed, double tolerance,
                                                double step) {
    const std::vector<Check> checks = {
        {"conv3d", [](std::mt19937_64& r, double h) { return check_conv(r, h, false); }},
        {"conv3d_weight_standardized",
         [](std::mt19937_64& r, double h) { return check_conv(r, h, true); }},
        {"group_norm", check_group_norm},
        {"relu", [](std::mt19937_64& r, double h) {
             return check_activation(r, h, Activation::relu);
         }},
        {"tanh", [](std::mt19937_64& r, double h) {
             return check_activation(r, h, Activation::tanh);
         }},
        {"upsample_nearest", check_upsample},
        {"residual_block", check_residual_block},
        {"vq_loss_terms", check_vq_terms},
        {"das_layer", check_das_layer},
        {"data_to_image_loss",
         [](std::mt19937_64& r, double h) { return check_composed_loss(r, h, true); }},
        {"data_to_data_loss",
         [](std::mt19937_64& r, double h) { return check_composed_loss(r, h, false); }},
    };

    std::vector<GradCheckResult> results;
    std::mt19937_64 rng(seed);
    for (const Check& check : checks) {
        GradCheckResult r;
        r.name = check.name;
        r.max_rel_err = check.run(rng, step);
        r.pass = r.max_rel_err <= tolerance;
        results.push_back(std::move(r));
    }
    return results;
}

bool all_passed(const std::vector<GradCheckResult>& results) {
    for (const GradCheckResult& r : results)
        if (!r.pass) return false;
    return !results.empty();
}

}  // namespace udic

#include "udic/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace udic {

namespace {

std::size_t ceil_div(std::size_t a, std::size_t b) { return (a + b - 1) / b; }

void check_conv_shapes(const Tensor& x, const ConvLayer& layer) {
    if (x.rank() != 4)
        throw std::invalid_argument("conv3d: input must be (C, D1, D2, D3)");
    if (layer.weights.rank() != 5)
        throw std::invalid_argument("conv3d: weights must be (C_out, C_in, k1, k2, k3)");
    if (layer.bias.rank() != 1 || layer.bias.dim(0) != layer.weights.dim(0))
        throw std::invalid_argument("conv3d: bias must be (C_out)");
    if (x.dim(0) != layer.weights.dim(1))
        throw std::invalid_argument("conv3d: channel mismatch");
    for (std::size_t a = 0; a < 3; ++a) {
        if (layer.stride[a] < 1)
            throw std::invalid_argument("conv3d: stride must be >= 1");
        if (layer.weights.dim(2 + a) % 2 == 0)
            throw std::invalid_argument("conv3d: kernel dims must be odd");
    }
}

struct ConvDims {
    std::size_t c_in, c_out;
    std::size_t in[3], k[3], pad[3], stride[3], out[3];
};

ConvDims conv_dims(const Tensor& x, const ConvLayer& layer) {
    ConvDims d;
    d.c_in = x.dim(0);
    d.c_out = layer.weights.dim(0);
    for (std::size_t a = 0; a < 3; ++a) {
        d.in[a] = x.dim(1 + a);
        d.k[a] = layer.weights.dim(2 + a);
        d.pad[a] = d.k[a] / 2;
        d.stride[a] = layer.stride[a];
        d.out[a] = ceil_div(d.in[a], d.stride[a]);
    }
    return d;
}

// Kernel offsets d with 0 <= o*s + d - pad < in, clamped to [0, k).
inline void tap_bounds(std::size_t o, std::size_t s, std::size_t pad, std::size_t k,
                       std::size_t in, std::ptrdiff_t& lo, std::ptrdiff_t& hi) {
    const std::ptrdiff_t base = static_cast<std::ptrdiff_t>(o * s) -
                                static_cast<std::ptrdiff_t>(pad);
    lo = std::max<std::ptrdiff_t>(0, -base);
    hi = std::min<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(k),
                                  static_cast<std::ptrdiff_t>(in) - base);
}

}  // namespace

Tensor standardize_weights(const Tensor& weights, double eps) {
    if (weights.rank() != 5)
        throw std::invalid_argument("standardize_weights: weights must be rank 5");
    const std::size_t c_out = weights.dim(0);
    const std::size_t fan = weights.size() / c_out;
    Tensor out(weights.shape());
    for (std::size_t co = 0; co < c_out; ++co) {
        const double* w = weights.data() + co * fan;
        double* o = out.data() + co * fan;
        double mean = 0.0;
        for (std::size_t i = 0; i < fan; ++i) mean += w[i];
        mean /= static_cast<double>(fan);
        double var = 0.0;
        for (std::size_t i = 0; i < fan; ++i) {
            const double d = w[i] - mean;
            var += d * d;
        }
        var /= static_cast<double>(fan);
        const double inv_std = 1.0 / std::sqrt(var + eps);
        for (std::size_t i = 0; i < fan; ++i) o[i] = (w[i] - mean) * inv_std;
    }
    return out;
}

Tensor conv3d_forward(const Tensor& x, const ConvLayer& layer) {
    check_conv_shapes(x, layer);
    const ConvDims d = conv_dims(x, layer);

    const Tensor w_eff = layer.weight_standardization
                             ? standardize_weights(layer.weights, layer.ws_eps)
                             : layer.weights;

    Tensor y({d.c_out, d.out[0], d.out[1], d.out[2]});
    const double* xd = x.data();
    const double* wd = w_eff.data();
    double* yd = y.data();

    const std::size_t x_c = d.in[0] * d.in[1] * d.in[2];
    const std::size_t w_c = d.c_in * d.k[0] * d.k[1] * d.k[2];

    std::size_t yi = 0;
    for (std::size_t co = 0; co < d.c_out; ++co) {
        const double* w_co = wd + co * w_c;
        const double b = layer.bias[co];
        for (std::size_t o1 = 0; o1 < d.out[0]; ++o1) {
            std::ptrdiff_t d1lo, d1hi;
            tap_bounds(o1, d.stride[0], d.pad[0], d.k[0], d.in[0], d1lo, d1hi);
            const std::ptrdiff_t i1base = static_cast<std::ptrdiff_t>(o1 * d.stride[0]) -
                                          static_cast<std::ptrdiff_t>(d.pad[0]);
            for (std::size_t o2 = 0; o2 < d.out[1]; ++o2) {
                std::ptrdiff_t d2lo, d2hi;
                tap_bounds(o2, d.stride[1], d.pad[1], d.k[1], d.in[1], d2lo, d2hi);
                const std::ptrdiff_t i2base = static_cast<std::ptrdiff_t>(o2 * d.stride[1]) -
                                              static_cast<std::ptrdiff_t>(d.pad[1]);
                for (std::size_t o3 = 0; o3 < d.out[2]; ++o3, ++yi) {
                    std::ptrdiff_t d3lo, d3hi;
                    tap_bounds(o3, d.stride[2], d.pad[2], d.k[2], d.in[2], d3lo, d3hi);
                    const std::ptrdiff_t i3base = static_cast<std::ptrdiff_t>(o3 * d.stride[2]) -
                                                  static_cast<std::ptrdiff_t>(d.pad[2]);
                    double acc = b;
                    for (std::size_t ci = 0; ci < d.c_in; ++ci) {
                        const double* x_ci = xd + ci * x_c;
                        const double* w_ci = w_co + ci * d.k[0] * d.k[1] * d.k[2];
                        for (std::ptrdiff_t d1 = d1lo; d1 < d1hi; ++d1) {
                            const std::size_t i1 = static_cast<std::size_t>(i1base + d1);
                            for (std::ptrdiff_t d2 = d2lo; d2 < d2hi; ++d2) {
                                const std::size_t i2 = static_cast<std::size_t>(i2base + d2);
                                const double* xrow =
                                    x_ci + (i1 * d.in[1] + i2) * d.in[2] + i3base;
                                const double* wrow =
                                    w_ci + (static_cast<std::size_t>(d1) * d.k[1] +
                                            static_cast<std::size_t>(d2)) *
                                               d.k[2];
                                for (std::ptrdiff_t d3 = d3lo; d3 < d3hi; ++d3)
                                    acc += wrow[d3] * xrow[d3];
                            }
                        }
                    }
                    yd[yi] = acc;
                }
            }
        }
    }
    return y;
}

Conv3dGrads conv3d_backward(const Tensor& grad_out, const Tensor& x, const ConvLayer& layer) {
    check_conv_shapes(x, layer);
    const ConvDims d = conv_dims(x, layer);
    if (grad_out.rank() != 4 || grad_out.dim(0) != d.c_out || grad_out.dim(1) != d.out[0] ||
        grad_out.dim(2) != d.out[1] || grad_out.dim(3) != d.out[2])
        throw std::invalid_argument("conv3d_backward: grad_out shape mismatch");

    const Tensor w_eff = layer.weight_standardization
                             ? standardize_weights(layer.weights, layer.ws_eps)
                             : layer.weights;

    Conv3dGrads g;
    g.input = Tensor(x.shape());
    g.weights = Tensor(layer.weights.shape());  // grad wrt effective weights first
    g.bias = Tensor(layer.bias.shape());

    const double* xd = x.data();
    const double* wd = w_eff.data();
    const double* god = grad_out.data();
    double* gxd = g.input.data();
    double* gwd = g.weights.data();

    const std::size_t x_c = d.in[0] * d.in[1] * d.in[2];
    const std::size_t w_c = d.c_in * d.k[0] * d.k[1] * d.k[2];

    std::size_t oi = 0;
    for (std::size_t co = 0; co < d.c_out; ++co) {
        const double* w_co = wd + co * w_c;
        double* gw_co = gwd + co * w_c;
        double gb = 0.0;
        for (std::size_t o1 = 0; o1 < d.out[0]; ++o1) {
            std::ptrdiff_t d1lo, d1hi;
            tap_bounds(o1, d.stride[0], d.pad[0], d.k[0], d.in[0], d1lo, d1hi);
            const std::ptrdiff_t i1base = static_cast<std::ptrdiff_t>(o1 * d.stride[0]) -
                                          static_cast<std::ptrdiff_t>(d.pad[0]);
            for (std::size_t o2 = 0; o2 < d.out[1]; ++o2) {
                std::ptrdiff_t d2lo, d2hi;
                tap_bounds(o2, d.stride[1], d.pad[1], d.k[1], d.in[1], d2lo, d2hi);
                const std::ptrdiff_t i2base = static_cast<std::ptrdiff_t>(o2 * d.stride[1]) -
                                              static_cast<std::ptrdiff_t>(d.pad[1]);
                for (std::size_t o3 = 0; o3 < d.out[2]; ++o3, ++oi) {
                    const double go = god[oi];
                    if (go == 0.0) continue;
                    gb += go;
                    std::ptrdiff_t d3lo, d3hi;
                    tap_bounds(o3, d.stride[2], d.pad[2], d.k[2], d.in[2], d3lo, d3hi);
                    const std::ptrdiff_t i3base = static_cast<std::ptrdiff_t>(o3 * d.stride[2]) -
                                                  static_cast<std::ptrdiff_t>(d.pad[2]);
                    for (std::size_t ci = 0; ci < d.c_in; ++ci) {
                        const double* x_ci = xd + ci * x_c;
                        double* gx_ci = gxd + ci * x_c;
                        const double* w_ci = w_co + ci * d.k[0] * d.k[1] * d.k[2];
                        double* gw_ci = gw_co + ci * d.k[0] * d.k[1] * d.k[2];
                        for (std::ptrdiff_t d1 = d1lo; d1 < d1hi; ++d1) {
                            const std::size_t i1 = static_cast<std::size_t>(i1base + d1);
                            for (std::ptrdiff_t d2 = d2lo; d2 < d2hi; ++d2) {
                                const std::size_t i2 = static_cast<std::size_t>(i2base + d2);
                                const std::size_t xoff =
                                    (i1 * d.in[1] + i2) * d.in[2] +
                                    static_cast<std::size_t>(i3base + d3lo);
                                const std::size_t woff =
                                    (static_cast<std::size_t>(d1) * d.k[1] +
                                     static_cast<std::size_t>(d2)) *
                                        d.k[2] +
                                    static_cast<std::size_t>(d3lo);
                                const double* xrow = x_ci + xoff;
                                double* gxrow = gx_ci + xoff;
                                const double* wrow = w_ci + woff;
                                double* gwrow = gw_ci + woff;
                                const std::size_t n = static_cast<std::size_t>(d3hi - d3lo);
                                for (std::size_t t = 0; t < n; ++t) {
                                    gwrow[t] += go * xrow[t];
                                    gxrow[t] += go * wrow[t];
                                }
                            }
                        }
                    }
                }
            }
        }
        g.bias[co] = gb;
    }

    if (layer.weight_standardization) {
        // Chain through w_hat = (w - mean) / sqrt(var + eps), per output channel.
        const std::size_t fan = layer.weights.size() / d.c_out;
        Tensor g_raw(layer.weights.shape());
        for (std::size_t co = 0; co < d.c_out; ++co) {
            const double* w = layer.weights.data() + co * fan;
            const double* gh = g.weights.data() + co * fan;
            double* gr = g_raw.data() + co * fan;
            double mean = 0.0;
            for (std::size_t i = 0; i < fan; ++i) mean += w[i];
            mean /= static_cast<double>(fan);
            double var = 0.0;
            for (std::size_t i = 0; i < fan; ++i) {
                const double dev = w[i] - mean;
                var += dev * dev;
            }
            var /= static_cast<double>(fan);
            const double inv_std = 1.0 / std::sqrt(var + layer.ws_eps);
            double g_mean = 0.0, gw_dot = 0.0;
            for (std::size_t i = 0; i < fan; ++i) {
                g_mean += gh[i];
                gw_dot += gh[i] * (w[i] - mean) * inv_std;
            }
            g_mean /= static_cast<double>(fan);
            gw_dot /= static_cast<double>(fan);
            for (std::size_t i = 0; i < fan; ++i) {
                const double w_hat = (w[i] - mean) * inv_std;
                gr[i] = (gh[i] - g_mean - w_hat * gw_dot) * inv_std;
            }
        }
        g.weights = std::move(g_raw);
    }
    return g;
}

Tensor group_norm_forward(const Tensor& x, const GroupNormLayer& layer) {
    if (x.rank() != 4)
        throw std::invalid_argument("group_norm: input must be (C, D1, D2, D3)");
    const std::size_t channels = x.dim(0);
    if (layer.num_groups == 0 || channels % layer.num_groups != 0)
        throw std::invalid_argument("group_norm: num_groups must divide channel count");
    if (layer.gamma.size() != channels || layer.beta.size() != channels)
        throw std::invalid_argument("group_norm: affine parameter size mismatch");
    if (!(layer.eps > 0.0))
        throw std::invalid_argument("group_norm: eps must be positive");

    const std::size_t spatial = x.dim(1) * x.dim(2) * x.dim(3);
    const std::size_t group_channels = channels / layer.num_groups;
    const std::size_t group_size = group_channels * spatial;

    Tensor y(x.shape());
    for (std::size_t g = 0; g < layer.num_groups; ++g) {
        const double* xg = x.data() + g * group_size;
        double* yg = y.data() + g * group_size;
        double mean = 0.0;
        for (std::size_t i = 0; i < group_size; ++i) mean += xg[i];
        mean /= static_cast<double>(group_size);
        double var = 0.0;
        for (std::size_t i = 0; i < group_size; ++i) {
            const double d = xg[i] - mean;
            var += d * d;
        }
        var /= static_cast<double>(group_size);
        const double inv_std = 1.0 / std::sqrt(var + layer.eps);
        for (std::size_t cg = 0; cg < group_channels; ++cg) {
            const std::size_t c = g * group_channels + cg;
            const double scale = layer.gamma[c];
            const double shift = layer.beta[c];
            const double* xc = xg + cg * spatial;
            double* yc = yg + cg * spatial;
            for (std::size_t i = 0; i < spatial; ++i)
                yc[i] = scale * (xc[i] - mean) * inv_std + shift;
        }
    }
    return y;
}

GroupNormGrads group_norm_backward(const Tensor& grad_out, const Tensor& x,
                                   const GroupNormLayer& layer) {
    if (!grad_out.same_shape(x))
        throw std::invalid_argument("group_norm_backward: grad shape mismatch");
    // Re-derives shapes and stats exactly as the forward pass.
    const std::size_t channels = x.dim(0);
    const std::size_t spatial = x.dim(1) * x.dim(2) * x.dim(3);
    const std::size_t group_channels = channels / layer.num_groups;
    const std::size_t group_size = group_channels * spatial;

    GroupNormGrads g;
    g.input = Tensor(x.shape());
    g.gamma = Tensor(layer.gamma.shape());
    g.beta = Tensor(layer.beta.shape());

    for (std::size_t grp = 0; grp < layer.num_groups; ++grp) {
        const double* xg = x.data() + grp * group_size;
        const double* gog = grad_out.data() + grp * group_size;
        double* gxg = g.input.data() + grp * group_size;

        double mean = 0.0;
        for (std::size_t i = 0; i < group_size; ++i) mean += xg[i];
        mean /= static_cast<double>(group_size);
        double var = 0.0;
        for (std::size_t i = 0; i < group_size; ++i) {
            const double d = xg[i] - mean;
            var += d * d;
        }
        var /= static_cast<double>(group_size);
        const double inv_std = 1.0 / std::sqrt(var + layer.eps);

        // dL/dx_hat, accumulated sums for the normalization backward.
        double sum_gh = 0.0, sum_gh_xhat = 0.0;
        for (std::size_t cg = 0; cg < group_channels; ++cg) {
            const std::size_t c = grp * group_channels + cg;
            const double scale = layer.gamma[c];
            const double* xc = xg + cg * spatial;
            const double* goc = gog + cg * spatial;
            double dgamma = 0.0, dbeta = 0.0;
            for (std::size_t i = 0; i < spatial; ++i) {
                const double x_hat = (xc[i] - mean) * inv_std;
                dgamma += goc[i] * x_hat;
                dbeta += goc[i];
                const double gh = goc[i] * scale;
                sum_gh += gh;
                sum_gh_xhat += gh * x_hat;
            }
            g.gamma[c] = dgamma;
            g.beta[c] = dbeta;
        }
        const double m = static_cast<double>(group_size);
        for (std::size_t cg = 0; cg < group_channels; ++cg) {
            const std::size_t c = grp * group_channels + cg;
            const double scale = layer.gamma[c];
            const double* xc = xg + cg * spatial;
            const double* goc = gog + cg * spatial;
            double* gxc = gxg + cg * spatial;
            for (std::size_t i = 0; i < spatial; ++i) {
                const double x_hat = (xc[i] - mean) * inv_std;
                const double gh = goc[i] * scale;
                gxc[i] = (gh - sum_gh / m - x_hat * sum_gh_xhat / m) * inv_std;
            }
        }
    }
    return g;
}

Tensor activation_forward(const Tensor& x, Activation kind) {
    Tensor y(x.shape());
    if (kind == Activation::relu) {
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
    } else {
        for (std::size_t i = 0; i < x.size(); ++i) y[i] = std::tanh(x[i]);
    }
    return y;
}

Tensor activation_backward(const Tensor& grad_out, const Tensor& x, Activation kind) {
    if (!grad_out.same_shape(x))
        throw std::invalid_argument("activation_backward: shape mismatch");
    Tensor g(x.shape());
    if (kind == Activation::relu) {
        for (std::size_t i = 0; i < x.size(); ++i) g[i] = x[i] > 0.0 ? grad_out[i] : 0.0;
    } else {
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double t = std::tanh(x[i]);
            g[i] = grad_out[i] * (1.0 - t * t);
        }
    }
    return g;
}

Tensor upsample_nearest_forward(const Tensor& x, const std::array<std::size_t, 3>& factors) {
    if (x.rank() != 4)
        throw std::invalid_argument("upsample: input must be (C, D1, D2, D3)");
    for (std::size_t f : factors)
        if (f < 1) throw std::invalid_argument("upsample: factors must be >= 1");

    const std::size_t C = x.dim(0);
    const std::size_t in1 = x.dim(1), in2 = x.dim(2), in3 = x.dim(3);
    Tensor y({C, in1 * factors[0], in2 * factors[1], in3 * factors[2]});
    const std::size_t o2n = in2 * factors[1], o3n = in3 * factors[2];
    double* yd = y.data();
    std::size_t yi = 0;
    for (std::size_t c = 0; c < C; ++c) {
        const double* xc = x.data() + c * in1 * in2 * in3;
        for (std::size_t o1 = 0; o1 < in1 * factors[0]; ++o1) {
            const std::size_t i1 = o1 / factors[0];
            for (std::size_t o2 = 0; o2 < o2n; ++o2) {
                const std::size_t i2 = o2 / factors[1];
                const double* xrow = xc + (i1 * in2 + i2) * in3;
                for (std::size_t o3 = 0; o3 < o3n; ++o3, ++yi)
                    yd[yi] = xrow[o3 / factors[2]];
            }
        }
    }
    return y;
}

Tensor upsample_nearest_backward(const Tensor& grad_out,
                                 const std::array<std::size_t, 4>& input_shape,
                                 const std::array<std::size_t, 3>& factors) {
    const std::size_t C = input_shape[0];
    const std::size_t in1 = input_shape[1], in2 = input_shape[2], in3 = input_shape[3];
    if (grad_out.rank() != 4 || grad_out.dim(0) != C || grad_out.dim(1) != in1 * factors[0] ||
        grad_out.dim(2) != in2 * factors[1] || grad_out.dim(3) != in3 * factors[2])
        throw std::invalid_argument("upsample_backward: grad shape mismatch");

    Tensor g({C, in1, in2, in3});
    const std::size_t o2n = in2 * factors[1], o3n = in3 * factors[2];
    const double* god = grad_out.data();
    std::size_t oi = 0;
    for (std::size_t c = 0; c < C; ++c) {
        double* gc = g.data() + c * in1 * in2 * in3;
        for (std::size_t o1 = 0; o1 < in1 * factors[0]; ++o1) {
            const std::size_t i1 = o1 / factors[0];
            for (std::size_t o2 = 0; o2 < o2n; ++o2) {
                const std::size_t i2 = o2 / factors[1];
                double* grow = gc + (i1 * in2 + i2) * in3;
                for (std::size_t o3 = 0; o3 < o3n; ++o3, ++oi)
                    grow[o3 / factors[2]] += god[oi];
            }
        }
    }
    return g;
}

Tensor residual_add_forward(const Tensor& x, const Tensor& y) {
    if (!x.same_shape(y))
        throw std::invalid_argument("residual_add: shape mismatch");
    return x + y;
}

std::pair<Tensor, Tensor> residual_add_backward(const Tensor& grad_out) {
    return {grad_out, grad_out};
}

Tensor crop_to(const Tensor& x, const std::array<std::size_t, 4>& target_shape) {
    if (x.rank() != 4)
        throw std::invalid_argument("crop: input must be rank 4");
    for (std::size_t a = 0; a < 4; ++a)
        if (target_shape[a] > x.dim(a))
            throw std::invalid_argument("crop: target exceeds input shape");

    Tensor y({target_shape[0], target_shape[1], target_shape[2], target_shape[3]});
    const std::size_t s1 = x.dim(1), s2 = x.dim(2), s3 = x.dim(3);
    std::size_t yi = 0;
    for (std::size_t c = 0; c < target_shape[0]; ++c)
        for (std::size_t i1 = 0; i1 < target_shape[1]; ++i1)
            for (std::size_t i2 = 0; i2 < target_shape[2]; ++i2) {
                const double* xrow = x.data() + ((c * s1 + i1) * s2 + i2) * s3;
                for (std::size_t i3 = 0; i3 < target_shape[3]; ++i3, ++yi)
                    y[yi] = xrow[i3];
            }
    return y;
}

Tensor crop_backward(const Tensor& grad_out, const std::array<std::size_t, 4>& input_shape) {
    Tensor g({input_shape[0], input_shape[1], input_shape[2], input_shape[3]});
    const std::size_t s1 = input_shape[1], s2 = input_shape[2], s3 = input_shape[3];
    std::size_t oi = 0;
    for (std::size_t c = 0; c < grad_out.dim(0); ++c)
        for (std::size_t i1 = 0; i1 < grad_out.dim(1); ++i1)
            for (std::size_t i2 = 0; i2 < grad_out.dim(2); ++i2) {
                double* grow = g.data() + ((c * s1 + i1) * s2 + i2) * s3;
                for (std::size_t i3 = 0; i3 < grad_out.dim(3); ++i3, ++oi)
                    grow[i3] = grad_out[oi];
            }
    return g;
}

}  // namespace udic

#include "udic/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace udic {

namespace {

std::vector<double> window_weights(const SsimConfig& cfg) {
    const std::size_t n = cfg.window_size;
    std::vector<double> w(n * n);
    if (cfg.window == SsimWindow::uniform) {
        const double v = 1.0 / static_cast<double>(n * n);
        std::fill(w.begin(), w.end(), v);
        return w;
    }
    if (!(cfg.gaussian_sigma > 0.0))
        throw std::invalid_argument("ssim: gaussian sigma must be positive");
    const double c = (static_cast<double>(n) - 1.0) / 2.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double di = static_cast<double>(i) - c;
            const double dj = static_cast<double>(j) - c;
            const double v = std::exp(-(di * di + dj * dj) /
                                      (2.0 * cfg.gaussian_sigma * cfg.gaussian_sigma));
            w[i * n + j] = v;
            sum += v;
        }
    }
    for (double& v : w) v /= sum;
    return w;
}

}  // namespace

double ssim(const Tensor& a, const Tensor& b, const SsimConfig& cfg) {
    if (a.rank() != 2 || !a.same_shape(b))
        throw std::invalid_argument("ssim: images must be 2D with equal shapes");
    if (cfg.window_size < 1)
        throw std::invalid_argument("ssim: window size must be >= 1");
    if (cfg.window_size > a.dim(0) || cfg.window_size > a.dim(1))
        throw std::invalid_argument("ssim: window does not fit inside image");
    if (!(cfg.k1 > 0.0) || !(cfg.k2 > 0.0))
        throw std::invalid_argument("ssim: k1 and k2 must be positive");

    double range = cfg.dynamic_range;
    if (!(range > 0.0)) {
        double lo = a[0], hi = a[0];
        for (std::size_t i = 0; i < a.size(); ++i) {
            lo = std::min({lo, a[i], b[i]});
            hi = std::max({hi, a[i], b[i]});
        }
        range = hi - lo;
        if (!(range > 0.0)) range = 1.0;  // identical constants
    }

    const double c1 = (cfg.k1 * range) * (cfg.k1 * range);
    const double c2 = (cfg.k2 * range) * (cfg.k2 * range);

    const std::vector<double> w = window_weights(cfg);
    const std::size_t n = cfg.window_size;
    const std::size_t nx = a.dim(0), nz = a.dim(1);

    double total = 0.0;
    std::size_t count = 0;
    for (std::size_t ox = 0; ox + n <= nx; ++ox) {
        for (std::size_t oz = 0; oz + n <= nz; ++oz) {
            double mu_a = 0.0, mu_b = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double* ra = a.data() + (ox + i) * nz + oz;
                const double* rb = b.data() + (ox + i) * nz + oz;
                const double* rw = w.data() + i * n;
                for (std::size_t j = 0; j < n; ++j) {
                    mu_a += rw[j] * ra[j];
                    mu_b += rw[j] * rb[j];
                }
            }
            // Second pass around the means avoids cancellation on flat windows.
            double var_a = 0.0, var_b = 0.0, cov = 0.0;
            for (std::size_t i = 0; i < n; ++i) {
                const double* ra = a.data() + (ox + i) * nz + oz;
                const double* rb = b.data() + (ox + i) * nz + oz;
                const double* rw = w.data() + i * n;
                for (std::size_t j = 0; j < n; ++j) {
                    const double da = ra[j] - mu_a;
                    const double db = rb[j] - mu_b;
                    var_a += rw[j] * da * da;
                    var_b += rw[j] * db * db;
                    cov += rw[j] * da * db;
                }
            }
            const double num = (2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2);
            const double den = (mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2);
            total += num / den;
            ++count;
        }
    }
    return total / static_cast<double>(count);
}

double mse(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw std::invalid_argument("mse: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        s += d * d;
    }
    return s / static_cast<double>(a.size());
}

}  // namespace udic

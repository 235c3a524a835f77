#include "udic/das.hpp"

#include <cmath>
#include <stdexcept>

namespace udic {

namespace {

void require_data_shape(const Tensor& f, const DelayTable& table) {
    if (f.rank() != 3 || f.dim(0) != table.n_t || f.dim(1) != table.n_s ||
        f.dim(2) != table.n_r)
        throw std::invalid_argument("das_forward: data shape does not match delay table");
}

void require_image_shape(const Tensor& u, const DelayTable& table) {
    if (u.rank() != 2 || u.dim(0) != table.n_x || u.dim(1) != table.n_z)
        throw std::invalid_argument("das_adjoint: image shape does not match delay table");
}

}  // namespace

Tensor das_forward(const Tensor& f, const DelayTable& table) {
    require_data_shape(f, table);

    Tensor u({table.n_x, table.n_z});
    const double* fd = f.data();
    const std::size_t n_s = table.n_s;
    const std::size_t n_r = table.n_r;
    const std::size_t trace_stride = n_s * n_r;  // stride of the time axis

    std::size_t e = 0;
    for (std::size_t i = 0; i < table.n_pixels(); ++i) {
        double acc = 0.0;
        for (std::size_t sm = 0; sm < trace_stride; ++sm, ++e) {
            if (!table.valid[e]) continue;
            const double idx = table.fractional_index[e];
            const std::size_t k = static_cast<std::size_t>(std::floor(idx));
            const double w = idx - static_cast<double>(k);
            const double* sample = fd + k * trace_stride + sm;
            acc += (1.0 - w) * sample[0] + w * sample[trace_stride];
        }
        u[i] = acc;
    }
    return u;
}

Tensor das_adjoint(const Tensor& u, const DelayTable& table) {
    require_image_shape(u, table);

    Tensor f({table.n_t, table.n_s, table.n_r});
    double* fd = f.data();
    const std::size_t trace_stride = table.n_s * table.n_r;

    std::size_t e = 0;
    for (std::size_t i = 0; i < table.n_pixels(); ++i) {
        const double ui = u[i];
        for (std::size_t sm = 0; sm < trace_stride; ++sm, ++e) {
            if (!table.valid[e]) continue;
            const double idx = table.fractional_index[e];
            const std::size_t k = static_cast<std::size_t>(std::floor(idx));
            const double w = idx - static_cast<double>(k);
            double* sample = fd + k * trace_stride + sm;
            sample[0] += (1.0 - w) * ui;
            sample[trace_stride] += w * ui;
        }
    }
    return f;
}

double theoretical_lossless_rate(const std::array<std::size_t, 3>& data_shape,
                                 const std::array<std::size_t, 2>& image_shape) {
    for (std::size_t d : data_shape)
        if (d == 0) throw std::invalid_argument("theoretical_lossless_rate: zero data dimension");
    for (std::size_t d : image_shape)
        if (d == 0) throw std::invalid_argument("theoretical_lossless_rate: zero image dimension");
    const double data_elems = static_cast<double>(data_shape[0]) *
                              static_cast<double>(data_shape[1]) *
                              static_cast<double>(data_shape[2]);
    const double image_elems =
        static_cast<double>(image_shape[0]) * static_cast<double>(image_shape[1]);
    return data_elems / image_elems;
}

}  // namespace udic

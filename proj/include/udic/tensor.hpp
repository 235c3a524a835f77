#pragma once

#include <cassert>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <utility>
#include <vector>

namespace udic {

/// Dense row-major tensor of 64-bit floats. Rank is dynamic; a rank-0 tensor
/// holds a single scalar.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(element_count(shape_), 0.0) {}
    Tensor(std::vector<std::size_t> shape, std::vector<double> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != element_count(shape_))
            throw std::invalid_argument("tensor: data length does not match shape");
    }

    static std::size_t element_count(const std::vector<std::size_t>& shape) {
        std::size_t n = 1;
        for (std::size_t d : shape) n *= d;
        return n;
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::vector<double>& values() { return data_; }
    const std::vector<double>& values() const { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }

    template <class... Ix>
    double& at(Ix... ix) {
        return data_[offset({static_cast<std::size_t>(ix)...})];
    }
    template <class... Ix>
    double at(Ix... ix) const {
        return data_[offset({static_cast<std::size_t>(ix)...})];
    }

    std::size_t offset(std::initializer_list<std::size_t> idx) const {
        assert(idx.size() == shape_.size());
        std::size_t off = 0;
        auto it = idx.begin();
        for (std::size_t a = 0; a < shape_.size(); ++a, ++it) {
            assert(*it < shape_[a]);
            off = off * shape_[a] + *it;
        }
        return off;
    }

    /// Same data, new shape; element counts must agree.
    Tensor reshaped(std::vector<std::size_t> new_shape) const {
        if (element_count(new_shape) != data_.size())
            throw std::invalid_argument("tensor: reshape changes element count");
        return Tensor(std::move(new_shape), data_);
    }

    void fill(double v) {
        for (double& x : data_) x = v;
    }

    Tensor& operator+=(const Tensor& rhs) {
        require_same_shape(rhs);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += rhs.data_[i];
        return *this;
    }
    Tensor& operator-=(const Tensor& rhs) {
        require_same_shape(rhs);
        for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= rhs.data_[i];
        return *this;
    }
    Tensor& operator*=(double s) {
        for (double& x : data_) x *= s;
        return *this;
    }

    friend Tensor operator+(Tensor a, const Tensor& b) { return a += b; }
    friend Tensor operator-(Tensor a, const Tensor& b) { return a -= b; }
    friend Tensor operator*(Tensor a, double s) { return a *= s; }
    friend Tensor operator*(double s, Tensor a) { return a *= s; }

    bool same_shape(const Tensor& rhs) const { return shape_ == rhs.shape_; }

private:
    void require_same_shape(const Tensor& rhs) const {
        if (!same_shape(rhs))
            throw std::invalid_argument("tensor: shape mismatch");
    }

    std::vector<std::size_t> shape_;
    std::vector<double> data_;
};

inline double dot(const Tensor& a, const Tensor& b) {
    if (!a.same_shape(b))
        throw std::invalid_argument("dot: shape mismatch");
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

/// Sum of squared entries.
inline double sum_squares(const Tensor& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * a[i];
    return s;
}

inline double l2_norm(const Tensor& a) { return std::sqrt(sum_squares(a)); }

inline double max_abs(const Tensor& a) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i]));
    return m;
}

}  // namespace udic

#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace evocnn {

/// Spatial shape of a single sample: channels, height, width.
struct Shape3 {
    std::size_t c = 0;
    std::size_t h = 0;
    std::size_t w = 0;

    std::size_t size() const { return c * h * w; }
    friend bool operator==(const Shape3&, const Shape3&) = default;
};

std::string to_string(const Shape3& s);

/// Dense (batch, channel, height, width) array stored row-major.
class Tensor4 {
public:
    Tensor4() = default;
    Tensor4(std::size_t n, std::size_t c, std::size_t h, std::size_t w, double fill = 0.0)
        : dims_{n, c, h, w}, data_(n * c * h * w, fill) {}
    Tensor4(std::size_t n, Shape3 s, double fill = 0.0) : Tensor4(n, s.c, s.h, s.w, fill) {}

    std::size_t batch() const { return dims_[0]; }
    std::size_t channels() const { return dims_[1]; }
    std::size_t height() const { return dims_[2]; }
    std::size_t width() const { return dims_[3]; }
    const std::array<std::size_t, 4>& dims() const { return dims_; }
    Shape3 sample_shape() const { return {dims_[1], dims_[2], dims_[3]}; }
    std::size_t sample_size() const { return dims_[1] * dims_[2] * dims_[3]; }
    std::size_t size() const { return data_.size(); }

    double& operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) {
        return data_[((n * dims_[1] + c) * dims_[2] + h) * dims_[3] + w];
    }
    double operator()(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const {
        return data_[((n * dims_[1] + c) * dims_[2] + h) * dims_[3] + w];
    }

    double* data() { return data_.data(); }
    const double* data() const { return data_.data(); }
    std::span<double> values() { return data_; }
    std::span<const double> values() const { return data_; }
    std::span<double> sample(std::size_t n) {
        return std::span<double>(data_).subspan(n * sample_size(), sample_size());
    }
    std::span<const double> sample(std::size_t n) const {
        return std::span<const double>(data_).subspan(n * sample_size(), sample_size());
    }

    void fill(double v);
    bool same_dims(const Tensor4& o) const { return dims_ == o.dims_; }
    bool all_finite() const;

    /// Reinterprets the data with new dims of equal element count.
    Tensor4 reshaped(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const;

private:
    std::array<std::size_t, 4> dims_{0, 0, 0, 0};
    std::vector<double> data_;
};

std::string dims_string(const Tensor4& t);

}  // namespace evocnn

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace spectex {

struct Shape {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;

    std::size_t plane() const noexcept { return height * width; }
    std::size_t size() const noexcept { return channels * height * width; }

    friend bool operator==(const Shape&, const Shape&) = default;
};

/// Dense [channels, height, width] array, row-major within each channel.
///
/// Images, feature maps and their gradients all use this type. `T` is
/// `float` for production synthesis and `double` for gradient checks.
template <typename T>
class Tensor {
public:
    using value_type = T;

    Tensor() = default;
    explicit Tensor(Shape shape, T fill = T{0})
        : shape_(shape), values_(shape.size(), fill) {}
    Tensor(std::size_t channels, std::size_t height, std::size_t width, T fill = T{0})
        : Tensor(Shape{channels, height, width}, fill) {}
    Tensor(Shape shape, std::vector<T> values);

    const Shape& shape() const noexcept { return shape_; }
    std::size_t channels() const noexcept { return shape_.channels; }
    std::size_t height() const noexcept { return shape_.height; }
    std::size_t width() const noexcept { return shape_.width; }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    std::span<T> values() noexcept { return values_; }
    std::span<const T> values() const noexcept { return values_; }
    T* data() noexcept { return values_.data(); }
    const T* data() const noexcept { return values_.data(); }

    std::span<T> channel(std::size_t c) noexcept {
        return {values_.data() + c * shape_.plane(), shape_.plane()};
    }
    std::span<const T> channel(std::size_t c) const noexcept {
        return {values_.data() + c * shape_.plane(), shape_.plane()};
    }

    T& operator()(std::size_t c, std::size_t y, std::size_t x) noexcept {
        return values_[(c * shape_.height + y) * shape_.width + x];
    }
    T operator()(std::size_t c, std::size_t y, std::size_t x) const noexcept {
        return values_[(c * shape_.height + y) * shape_.width + x];
    }
    T& operator[](std::size_t i) noexcept { return values_[i]; }
    T operator[](std::size_t i) const noexcept { return values_[i]; }

    template <typename U>
    Tensor<U> cast() const {
        Tensor<U> out(shape_);
        for (std::size_t i = 0; i < values_.size(); ++i) out[i] = static_cast<U>(values_[i]);
        return out;
    }

    /// Adds `scale * other` element-wise.
    Tensor& add_scaled(const Tensor& other, T scale);

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    std::vector<T> values_;
};

/// 3x3 convolution kernel stored [out][in][ky][kx] with one bias per output.
template <typename T>
class ConvWeights {
public:
    static constexpr std::size_t kernel_size = 3;

    ConvWeights() = default;
    ConvWeights(std::size_t out_channels, std::size_t in_channels, std::vector<T> kernel,
                std::vector<T> bias);

    std::size_t out_channels() const noexcept { return out_channels_; }
    std::size_t in_channels() const noexcept { return in_channels_; }
    std::span<const T> kernel() const noexcept { return kernel_; }
    std::span<const T> bias() const noexcept { return bias_; }

    /// The nine taps linking input channel `in` to output channel `out`.
    std::span<const T, 9> taps(std::size_t out, std::size_t in) const noexcept {
        return std::span<const T, 9>(kernel_.data() + (out * in_channels_ + in) * 9, 9);
    }

    template <typename U>
    ConvWeights<U> cast() const {
        return ConvWeights<U>(out_channels_, in_channels_,
                              std::vector<U>(kernel_.begin(), kernel_.end()),
                              std::vector<U>(bias_.begin(), bias_.end()));
    }

private:
    std::size_t out_channels_ = 0;
    std::size_t in_channels_ = 0;
    std::vector<T> kernel_;
    std::vector<T> bias_;
};

// Differentiable primitives. Only data gradients are provided; weights are
// never trained.

/// Same-size 3x3 convolution, zero padding 1, stride 1.
template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const ConvWeights<T>& w);

/// Gradient of `conv2d_forward` with respect to its input.
template <typename T>
Tensor<T> conv2d_backward_data(const Tensor<T>& grad_out, const ConvWeights<T>& w);

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x);

/// Passes `grad_out` where `x_pre > 0`; the subgradient at exactly 0 is 0.
template <typename T>
Tensor<T> relu_backward(const Tensor<T>& grad_out, const Tensor<T>& x_pre);

/// 2x2 stride-2 mean pooling. A trailing odd row or column is dropped.
template <typename T>
Tensor<T> avgpool_forward(const Tensor<T>& x);

/// Spreads each pooled gradient equally over its 2x2 block. Cells dropped by
/// the forward pass get 0. `input_shape` is the shape fed to the forward pass.
template <typename T>
Tensor<T> avgpool_backward(const Tensor<T>& grad_out, const Shape& input_shape);

/// Inner product accumulated in double.
template <typename T>
double dot(const Tensor<T>& a, const Tensor<T>& b);

} // namespace spectex

#include "spectex/tensor.hpp"

#include "spectex/errors.hpp"

#include <algorithm>
#include <string>

namespace spectex {

namespace {

std::string shape_text(const Shape& s) {
    return std::to_string(s.channels) + "x" + std::to_string(s.height) + "x" +
           std::to_string(s.width);
}

// Copies `src` into a (C, H+2, W+2) buffer with a one-pixel zero border.
template <typename T>
std::vector<T> pad_one(const Tensor<T>& src) {
    const std::size_t h = src.height();
    const std::size_t w = src.width();
    const std::size_t pw = w + 2;
    std::vector<T> padded(src.channels() * (h + 2) * pw, T{0});
    for (std::size_t c = 0; c < src.channels(); ++c) {
        for (std::size_t y = 0; y < h; ++y) {
            const T* row = src.data() + (c * h + y) * w;
            std::copy(row, row + w, padded.data() + (c * (h + 2) + y + 1) * pw + 1);
        }
    }
    return padded;
}

} // namespace

template <typename T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) : shape_(shape), values_(std::move(values)) {
    if (values_.size() != shape_.size()) {
        throw ConfigError("tensor of shape " + shape_text(shape_) + " given " +
                          std::to_string(values_.size()) + " values");
    }
}

template <typename T>
Tensor<T>& Tensor<T>::add_scaled(const Tensor& other, T scale) {
    if (other.shape_ != shape_) {
        throw ConfigError("add_scaled: shape " + shape_text(other.shape_) + " vs " +
                          shape_text(shape_));
    }
    for (std::size_t i = 0; i < values_.size(); ++i) values_[i] += scale * other.values_[i];
    return *this;
}

template <typename T>
ConvWeights<T>::ConvWeights(std::size_t out_channels, std::size_t in_channels,
                            std::vector<T> kernel, std::vector<T> bias)
    : out_channels_(out_channels), in_channels_(in_channels), kernel_(std::move(kernel)),
      bias_(std::move(bias)) {
    if (kernel_.size() != out_channels_ * in_channels_ * 9) {
        throw ConfigError("conv kernel needs " + std::to_string(out_channels_ * in_channels_ * 9) +
                          " values, got " + std::to_string(kernel_.size()));
    }
    if (bias_.size() != out_channels_) {
        throw ConfigError("conv bias needs " + std::to_string(out_channels_) + " values, got " +
                          std::to_string(bias_.size()));
    }
}

template <typename T>
Tensor<T> conv2d_forward(const Tensor<T>& input, const ConvWeights<T>& w) {
    if (input.channels() != w.in_channels()) {
        throw ConfigError("conv2d_forward: input has " + std::to_string(input.channels()) +
                          " channels, kernel expects " + std::to_string(w.in_channels()));
    }
    const std::size_t h = input.height();
    const std::size_t width = input.width();
    const std::size_t pw = width + 2;
    const std::size_t cin = w.in_channels();
    const auto cout = static_cast<long>(w.out_channels());
    const auto rows = static_cast<long>(h);
    const std::vector<T> padded = pad_one(input);
    Tensor<T> out(w.out_channels(), h, width);
    const auto bias = w.bias();

#pragma omp parallel
    {
        std::vector<T> acc(width);
#pragma omp for collapse(2) schedule(static)
        for (long o = 0; o < cout; ++o) {
            for (long y = 0; y < rows; ++y) {
                std::fill(acc.begin(), acc.end(), T{0});
                T* __restrict a = acc.data();
                for (std::size_t c = 0; c < cin; ++c) {
                    const auto taps = w.taps(static_cast<std::size_t>(o), c);
                    for (std::size_t dy = 0; dy < 3; ++dy) {
                        const T* row = padded.data() + (c * (h + 2) + static_cast<std::size_t>(y) + dy) * pw;
                        for (std::size_t dx = 0; dx < 3; ++dx) {
                            const T k = taps[dy * 3 + dx];
                            const T* __restrict r = row + dx;
                            for (std::size_t x = 0; x < width; ++x) a[x] += k * r[x];
                        }
                    }
                }
                T* dst = out.data() + (static_cast<std::size_t>(o) * h + static_cast<std::size_t>(y)) * width;
                const T b = bias[static_cast<std::size_t>(o)];
                for (std::size_t x = 0; x < width; ++x) dst[x] = b + a[x];
            }
        }
    }
    return out;
}

template <typename T>
Tensor<T> conv2d_backward_data(const Tensor<T>& grad_out, const ConvWeights<T>& w) {
    if (grad_out.channels() != w.out_channels()) {
        throw ConfigError("conv2d_backward_data: gradient has " +
                          std::to_string(grad_out.channels()) + " channels, kernel produces " +
                          std::to_string(w.out_channels()));
    }
    const std::size_t h = grad_out.height();
    const std::size_t width = grad_out.width();
    const std::size_t pw = width + 2;
    const std::size_t cout = w.out_channels();
    const auto cin = static_cast<long>(w.in_channels());
    const auto rows = static_cast<long>(h);
    const std::vector<T> padded = pad_one(grad_out);
    Tensor<T> grad_in(w.in_channels(), h, width);

    // grad_in[c,y,x] = sum_{o,dy,dx} w[o,c,dy,dx] * grad_out[o, y+1-dy, x+1-dx]
#pragma omp parallel
    {
        std::vector<T> acc(width);
#pragma omp for collapse(2) schedule(static)
        for (long c = 0; c < cin; ++c) {
            for (long y = 0; y < rows; ++y) {
                std::fill(acc.begin(), acc.end(), T{0});
                T* __restrict a = acc.data();
                for (std::size_t o = 0; o < cout; ++o) {
                    const auto taps = w.taps(o, static_cast<std::size_t>(c));
                    for (std::size_t dy = 0; dy < 3; ++dy) {
                        const T* row = padded.data() + (o * (h + 2) + static_cast<std::size_t>(y) + 2 - dy) * pw;
                        for (std::size_t dx = 0; dx < 3; ++dx) {
                            const T k = taps[dy * 3 + dx];
                            const T* __restrict r = row + 2 - dx;
                            for (std::size_t x = 0; x < width; ++x) a[x] += k * r[x];
                        }
                    }
                }
                std::copy(acc.begin(), acc.end(),
                          grad_in.data() + (static_cast<std::size_t>(c) * h + static_cast<std::size_t>(y)) * width);
            }
        }
    }
    return grad_in;
}

template <typename T>
Tensor<T> relu_forward(const Tensor<T>& x) {
    Tensor<T> out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] > T{0} ? x[i] : T{0};
    return out;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& grad_out, const Tensor<T>& x_pre) {
    if (grad_out.shape() != x_pre.shape()) {
        throw ConfigError("relu_backward: gradient " + shape_text(grad_out.shape()) +
                          " vs activation " + shape_text(x_pre.shape()));
    }
    Tensor<T> out(x_pre.shape());
    for (std::size_t i = 0; i < x_pre.size(); ++i) out[i] = x_pre[i] > T{0} ? grad_out[i] : T{0};
    return out;
}

template <typename T>
Tensor<T> avgpool_forward(const Tensor<T>& x) {
    if (x.height() < 2 || x.width() < 2) {
        throw ConfigError("avgpool_forward: input " + shape_text(x.shape()) +
                          " is smaller than the 2x2 window");
    }
    const std::size_t oh = x.height() / 2;
    const std::size_t ow = x.width() / 2;
    Tensor<T> out(x.channels(), oh, ow);
    for (std::size_t c = 0; c < x.channels(); ++c) {
        for (std::size_t y = 0; y < oh; ++y) {
            for (std::size_t xx = 0; xx < ow; ++xx) {
                const T sum = x(c, 2 * y, 2 * xx) + x(c, 2 * y, 2 * xx + 1) +
                              x(c, 2 * y + 1, 2 * xx) + x(c, 2 * y + 1, 2 * xx + 1);
                out(c, y, xx) = sum * T(0.25);
            }
        }
    }
    return out;
}

template <typename T>
Tensor<T> avgpool_backward(const Tensor<T>& grad_out, const Shape& input_shape) {
    if (grad_out.channels() != input_shape.channels ||
        grad_out.height() != input_shape.height / 2 || grad_out.width() != input_shape.width / 2) {
        throw ConfigError("avgpool_backward: gradient " + shape_text(grad_out.shape()) +
                          " does not pool from " + shape_text(input_shape));
    }
    Tensor<T> grad_in(input_shape);
    for (std::size_t c = 0; c < grad_out.channels(); ++c) {
        for (std::size_t y = 0; y < grad_out.height(); ++y) {
            for (std::size_t x = 0; x < grad_out.width(); ++x) {
                const T g = grad_out(c, y, x) * T(0.25);
                grad_in(c, 2 * y, 2 * x) = g;
                grad_in(c, 2 * y, 2 * x + 1) = g;
                grad_in(c, 2 * y + 1, 2 * x) = g;
                grad_in(c, 2 * y + 1, 2 * x + 1) = g;
            }
        }
    }
    return grad_in;
}

template <typename T>
double dot(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.shape() != b.shape()) {
        throw ConfigError("dot: shape " + shape_text(a.shape()) + " vs " + shape_text(b.shape()));
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += double(a[i]) * double(b[i]);
    return sum;
}

#define SPECTEX_INSTANTIATE(T)                                                          \
    template class Tensor<T>;                                                           \
    template class ConvWeights<T>;                                                      \
    template Tensor<T> conv2d_forward(const Tensor<T>&, const ConvWeights<T>&);         \
    template Tensor<T> conv2d_backward_data(const Tensor<T>&, const ConvWeights<T>&);   \
    template Tensor<T> relu_forward(const Tensor<T>&);                                  \
    template Tensor<T> relu_backward(const Tensor<T>&, const Tensor<T>&);               \
    template Tensor<T> avgpool_forward(const Tensor<T>&);                               \
    template Tensor<T> avgpool_backward(const Tensor<T>&, const Shape&);                \
    template double dot(const Tensor<T>&, const Tensor<T>&);

SPECTEX_INSTANTIATE(float)
SPECTEX_INSTANTIATE(double)

#undef SPECTEX_INSTANTIATE

} // namespace spectex

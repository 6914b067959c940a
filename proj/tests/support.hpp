#pragma once

// Test-only oracles and generators. Nothing here calls into the code paths
// it is used to check.

#include "spectex/network.hpp"
#include "spectex/tensor.hpp"
#include "spectex/weights_io.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <random>
#include <vector>

namespace spectex::testing {

template <typename T = double>
Tensor<T> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
    std::uniform_real_distribution<double> u(lo, hi);
    Tensor<T> t(shape);
    for (auto& v : t.values()) v = static_cast<T>(u(rng));
    return t;
}

template <typename T = double>
ConvWeights<T> random_conv(std::size_t out, std::size_t in, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<T> k(out * in * 9);
    std::vector<T> b(out);
    for (auto& v : k) v = static_cast<T>(u(rng));
    for (auto& v : b) v = static_cast<T>(u(rng));
    return ConvWeights<T>(out, in, std::move(k), std::move(b));
}

/// Direct zero-padded 3x3 convolution with explicit bounds checks.
inline Tensor<double> direct_conv(const Tensor<double>& in, const ConvWeights<double>& w) {
    const long h = static_cast<long>(in.height());
    const long wd = static_cast<long>(in.width());
    Tensor<double> out(w.out_channels(), in.height(), in.width());
    for (std::size_t o = 0; o < w.out_channels(); ++o) {
        for (long y = 0; y < h; ++y) {
            for (long x = 0; x < wd; ++x) {
                double s = w.bias()[o];
                for (std::size_t c = 0; c < w.in_channels(); ++c) {
                    for (long dy = 0; dy < 3; ++dy) {
                        for (long dx = 0; dx < 3; ++dx) {
                            const long yy = y + dy - 1;
                            const long xx = x + dx - 1;
                            if (yy < 0 || yy >= h || xx < 0 || xx >= wd) continue;
                            s += w.kernel()[((o * w.in_channels() + c) * 3 + dy) * 3 + dx] *
                                 in(c, static_cast<std::size_t>(yy), static_cast<std::size_t>(xx));
                        }
                    }
                }
                out(o, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) = s;
            }
        }
    }
    return out;
}

/// O(N^2) unnormalised DFT: F[ky,kx] = sum x[y,x] exp(-2 pi i (ky y / H + kx x / W)).
inline std::vector<std::complex<double>> naive_dft2(std::span<const double> plane, std::size_t h, std::size_t w) {
    std::vector<std::complex<double>> out(h * w);
    for (std::size_t ky = 0; ky < h; ++ky) {
        for (std::size_t kx = 0; kx < w; ++kx) {
            std::complex<double> s{};
            for (std::size_t y = 0; y < h; ++y) {
                for (std::size_t x = 0; x < w; ++x) {
                    const double angle = -2.0 * std::numbers::pi *
                                         (double(ky * y % h) / double(h) + double(kx * x % w) / double(w));
                    s += plane[y * w + x] * std::polar(1.0, angle);
                }
            }
            out[ky * w + kx] = s;
        }
    }
    return out;
}

/// Inverse of naive_dft2, real part only.
inline std::vector<double> naive_idft2_real(const std::vector<std::complex<double>>& f, std::size_t h,
                                            std::size_t w) {
    std::vector<double> out(h * w);
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            std::complex<double> s{};
            for (std::size_t ky = 0; ky < h; ++ky) {
                for (std::size_t kx = 0; kx < w; ++kx) {
                    const double angle = 2.0 * std::numbers::pi *
                                         (double(ky * y % h) / double(h) + double(kx * x % w) / double(w));
                    s += f[ky * w + kx] * std::polar(1.0, angle);
                }
            }
            out[y * w + x] = s.real() / double(h * w);
        }
    }
    return out;
}

/// Central difference of `f` along coordinate `i` of `x`.
inline double central_difference(const std::function<double(const std::vector<double>&)>& f,
                                 std::vector<double> x, std::size_t i, double step) {
    const double x0 = x[i];
    x[i] = x0 + step;
    const double plus = f(x);
    x[i] = x0 - step;
    const double minus = f(x);
    return (plus - minus) / (2.0 * step);
}

inline double rel_err(double a, double b, double floor = 1e-12) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), floor});
}

/// Relative L2 distance |a - b| / max(|a|, |b|).
template <typename T>
double rel_l2(const Tensor<T>& a, const Tensor<T>& b) {
    double d = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        d += (double(a[i]) - double(b[i])) * (double(a[i]) - double(b[i]));
        na += double(a[i]) * double(a[i]);
        nb += double(b[i]) * double(b[i]);
    }
    return std::sqrt(d) / std::max({std::sqrt(na), std::sqrt(nb), 1e-300});
}

inline Tensor<double> circular_shift(const Tensor<double>& t, std::size_t dy, std::size_t dx) {
    Tensor<double> out(t.shape());
    for (std::size_t c = 0; c < t.channels(); ++c) {
        for (std::size_t y = 0; y < t.height(); ++y) {
            for (std::size_t x = 0; x < t.width(); ++x) {
                out(c, (y + dy) % t.height(), (x + dx) % t.width()) = t(c, y, x);
            }
        }
    }
    return out;
}

// Member of the equal-spectrum set: every channel gets the same random
// Hermitian phase field, taken from the DFT of real noise.
inline Tensor<double> random_phase_member(const Tensor<double>& exemplar, std::mt19937_64& rng) {
    const std::size_t h = exemplar.height(), w = exemplar.width();
    std::normal_distribution<double> normal;
    std::vector<double> noise(h * w);
    for (auto& v : noise) v = normal(rng);
    auto phase = naive_dft2(noise, h, w);
    for (auto& z : phase) z /= std::abs(z);
    Tensor<double> out(exemplar.shape());
    for (std::size_t c = 0; c < exemplar.channels(); ++c) {
        auto f = naive_dft2(exemplar.channel(c), h, w);
        for (std::size_t i = 0; i < f.size(); ++i) f[i] *= phase[i];
        const auto back = naive_idft2_real(f, h, w);
        std::copy(back.begin(), back.end(), out.channel(c).begin());
    }
    return out;
}

inline double distance(const Tensor<double>& a, const Tensor<double>& b) {
    double s = 0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
}

// Largest relative deviation of per-bin moduli of `img` from those of `exemplar`.
inline double modulus_error(const Tensor<double>& img, const Tensor<double>& exemplar) {
    double worst = 0;
    for (std::size_t c = 0; c < img.channels(); ++c) {
        const auto a = naive_dft2(img.channel(c), img.height(), img.width());
        const auto b = naive_dft2(exemplar.channel(c), img.height(), img.width());
        double scale = 0;
        for (const auto& z : b) scale = std::max(scale, std::abs(z));
        for (std::size_t i = 0; i < a.size(); ++i) {
            worst = std::max(worst, std::abs(std::abs(a[i]) - std::abs(b[i])) / scale);
        }
    }
    return worst;
}

/// conv1_1 (3->width) and conv1_2 (width->width) with random weights.
inline WeightSet tiny_weights(std::uint64_t seed, std::uint32_t width = 4) {
    const auto layers = narrowed_layers(vgg19_expected_layers("conv1_2"), width);
    return make_random_weights(layers, seed, {0.0f, 0.0f, 0.0f});
}

/// Same layers with uniform random biases as well.
inline WeightSet tiny_weights_with_bias(std::uint64_t seed, std::uint32_t width = 4) {
    WeightSet ws = tiny_weights(seed, width);
    std::mt19937_64 rng(seed ^ 0x9e3779b97f4a7c15ull);
    std::uniform_real_distribution<float> u(-0.2f, 0.2f);
    for (auto& r : ws.records) {
        for (auto& b : r.bias) b = u(rng);
    }
    return ws;
}

} // namespace spectex::testing

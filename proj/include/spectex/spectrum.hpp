#pragma once

#include "spectex/tensor.hpp"

#include <complex>
#include <cstddef>
#include <span>
#include <vector>

namespace spectex {

using Complex = std::complex<double>;

/// Row-major H x W complex array.
struct ComplexPlane {
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<Complex> values;

    Complex operator()(std::size_t y, std::size_t x) const { return values[y * width + x]; }
};

/// Unnormalised forward 2-D DFT of a real H x W plane.
ComplexPlane dft2(std::span<const double> plane, std::size_t height, std::size_t width);

/// Inverse of dft2 (scaled by 1/(H W)).
ComplexPlane idft2(const ComplexPlane& spectrum);

/// Unweighted channel mean of a 3-channel image.
std::vector<double> to_gray(const Tensor<double>& image);

/// How the common phase correction is chosen for multi-channel images.
enum class PhaseRule {
    /// Phase of sum_c F(Ihat_c) conj(F(I_c)): the nearest image whose channels
    /// share one phase field and keep the exemplar's per-channel moduli.
    joint,
    /// Phase of F(Ihat_gray) conj(F(I_gray)), imposed on every channel.
    gray,
};

/// Fourier data of the exemplar used by the spectrum constraint.
struct SpectrumTarget {
    std::size_t channels = 0;
    std::size_t height = 0;
    std::size_t width = 0;
    std::vector<ComplexPlane> channel_spectra; // F(I_c)
    ComplexPlane gray_spectrum;                // F(I_gray)
};

SpectrumTarget make_spectrum_target(const Tensor<double>& exemplar);

/// Nearest point of the exemplar's equal-spectrum set:
/// Itilde_c = F^-1(phi * F(I_c)) with phi = z / |z| per frequency bin, z
/// chosen by `rule`. Bins with |z| below 1e-12 of the largest |z| keep phi = 1.
/// Throws SpectrumSizeError when dims differ from the target.
Tensor<double> project_spectrum(const Tensor<double>& image, const SpectrumTarget& target,
                                PhaseRule rule = PhaseRule::joint);

struct SpectrumLoss {
    double loss = 0.0;        // 1/2 |Ihat - Itilde|^2
    Tensor<double> gradient;  // Ihat - Itilde
};

SpectrumLoss spectrum_loss_and_grad(const Tensor<double>& image, const SpectrumTarget& target,
                                    PhaseRule rule = PhaseRule::joint);

/// Signed frequency of DFT bin `k` along an axis of length `n`.
inline long signed_frequency(std::size_t k, std::size_t n) {
    return k <= n / 2 ? static_cast<long>(k) : static_cast<long>(k) - static_cast<long>(n);
}

} // namespace spectex

#include "spectex/spectrum.hpp"

#include "spectex/errors.hpp"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <string>

namespace spectex {

namespace {

// FFTW's planner is not thread-safe; execution of distinct plans is.
std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
}

struct FftwFree {
    void operator()(fftw_complex* p) const noexcept { fftw_free(p); }
};
using FftwBuffer = std::unique_ptr<fftw_complex[], FftwFree>;

FftwBuffer allocate(std::size_t n) {
    auto* p = static_cast<fftw_complex*>(fftw_malloc(sizeof(fftw_complex) * std::max<std::size_t>(n, 1)));
    if (!p) throw std::bad_alloc();
    return FftwBuffer(p);
}

// Aligned buffers keep FFTW's codelet choice, and hence rounding, identical
// from call to call.
std::vector<Complex> transform(const Complex* input, std::size_t height, std::size_t width, int sign) {
    const std::size_t n = height * width;
    FftwBuffer in = allocate(n);
    FftwBuffer out = allocate(n);
    for (std::size_t i = 0; i < n; ++i) {
        in[i][0] = input[i].real();
        in[i][1] = input[i].imag();
    }
    fftw_plan plan;
    {
        std::lock_guard lock(planner_mutex());
        plan = fftw_plan_dft_2d(static_cast<int>(height), static_cast<int>(width), in.get(),
                                out.get(), sign, FFTW_ESTIMATE);
    }
    if (!plan) throw Error("FFTW could not plan a " + std::to_string(height) + "x" + std::to_string(width) + " transform");
    fftw_execute(plan);
    {
        std::lock_guard lock(planner_mutex());
        fftw_destroy_plan(plan);
    }
    std::vector<Complex> result(n);
    for (std::size_t i = 0; i < n; ++i) result[i] = Complex(out[i][0], out[i][1]);
    return result;
}

std::vector<double> channel_mean(const Tensor<double>& image) {
    std::vector<double> gray(image.height() * image.width(), 0.0);
    for (std::size_t c = 0; c < image.channels(); ++c) {
        const auto ch = image.channel(c);
        for (std::size_t i = 0; i < gray.size(); ++i) gray[i] += ch[i];
    }
    const double inv = 1.0 / double(image.channels());
    for (auto& v : gray) v *= inv;
    return gray;
}

void check_dims(const Tensor<double>& image, const SpectrumTarget& target) {
    if (image.channels() != target.channels || image.height() != target.height ||
        image.width() != target.width) {
        throw SpectrumSizeError(
            "spectrum constraint needs a " + std::to_string(target.channels) + "x" +
            std::to_string(target.height) + "x" + std::to_string(target.width) + " image, got " +
            std::to_string(image.channels()) + "x" + std::to_string(image.height()) + "x" +
            std::to_string(image.width()));
    }
}

} // namespace

ComplexPlane dft2(std::span<const double> plane, std::size_t height, std::size_t width) {
    if (plane.size() != height * width) {
        throw ConfigError("dft2: plane has " + std::to_string(plane.size()) + " values, expected " +
                          std::to_string(height * width));
    }
    std::vector<Complex> in(plane.begin(), plane.end());
    return {height, width, transform(in.data(), height, width, FFTW_FORWARD)};
}

ComplexPlane idft2(const ComplexPlane& spectrum) {
    ComplexPlane out{spectrum.height, spectrum.width,
                     transform(spectrum.values.data(), spectrum.height, spectrum.width, FFTW_BACKWARD)};
    const double inv = 1.0 / double(spectrum.height * spectrum.width);
    for (auto& v : out.values) v *= inv;
    return out;
}

std::vector<double> to_gray(const Tensor<double>& image) {
    if (image.channels() != 3) {
        throw ConfigError("to_gray: expected 3 channels, got " + std::to_string(image.channels()));
    }
    return channel_mean(image);
}

SpectrumTarget make_spectrum_target(const Tensor<double>& exemplar) {
    if (exemplar.empty()) throw ConfigError("spectrum target of an empty image");
    SpectrumTarget target;
    target.channels = exemplar.channels();
    target.height = exemplar.height();
    target.width = exemplar.width();
    for (std::size_t c = 0; c < exemplar.channels(); ++c) {
        target.channel_spectra.push_back(dft2(exemplar.channel(c), exemplar.height(), exemplar.width()));
    }
    target.gray_spectrum = dft2(channel_mean(exemplar), exemplar.height(), exemplar.width());
    return target;
}

Tensor<double> project_spectrum(const Tensor<double>& image, const SpectrumTarget& target,
                                PhaseRule rule) {
    check_dims(image, target);
    const std::size_t n = target.height * target.width;

    std::vector<Complex> cross(n, Complex{});
    if (rule == PhaseRule::joint) {
        for (std::size_t c = 0; c < target.channels; ++c) {
            const auto f = dft2(image.channel(c), target.height, target.width);
            const auto& ref = target.channel_spectra[c].values;
            for (std::size_t k = 0; k < n; ++k) cross[k] += f.values[k] * std::conj(ref[k]);
        }
    } else {
        const auto f = dft2(channel_mean(image), target.height, target.width);
        const auto& ref = target.gray_spectrum.values;
        for (std::size_t k = 0; k < n; ++k) cross[k] = f.values[k] * std::conj(ref[k]);
    }

    double largest = 0.0;
    for (const auto& z : cross) largest = std::max(largest, std::abs(z));
    const double floor = 1e-12 * largest;
    std::vector<Complex> phase(n, Complex(1.0, 0.0));
    for (std::size_t k = 0; k < n; ++k) {
        const double mag = std::abs(cross[k]);
        if (mag > floor && mag > 0.0) phase[k] = cross[k] / mag;
    }

    Tensor<double> out(image.shape());
    for (std::size_t c = 0; c < target.channels; ++c) {
        ComplexPlane rotated{target.height, target.width, std::vector<Complex>(n)};
        const auto& ref = target.channel_spectra[c].values;
        for (std::size_t k = 0; k < n; ++k) rotated.values[k] = phase[k] * ref[k];
        const ComplexPlane back = idft2(rotated);

        double real_norm = 0.0;
        double imag_norm = 0.0;
        auto dst = out.channel(c);
        for (std::size_t i = 0; i < n; ++i) {
            dst[i] = back.values[i].real();
            real_norm += dst[i] * dst[i];
            imag_norm += back.values[i].imag() * back.values[i].imag();
        }
        if (real_norm > 0.0 && std::sqrt(imag_norm) > 1e-6 * std::sqrt(real_norm)) {
            throw Error("spectrum projection lost conjugate symmetry in channel " + std::to_string(c));
        }
    }
    return out;
}

SpectrumLoss spectrum_loss_and_grad(const Tensor<double>& image, const SpectrumTarget& target,
                                    PhaseRule rule) {
    const Tensor<double> projected = project_spectrum(image, target, rule);
    SpectrumLoss result{0.0, Tensor<double>(image.shape())};
    double sum = 0.0;
    for (std::size_t i = 0; i < image.size(); ++i) {
        const double d = image[i] - projected[i];
        result.gradient[i] = d;
        sum += d * d;
    }
    result.loss = 0.5 * sum;
    return result;
}

} // namespace spectex

#include "spectex/pipeline.hpp"

#include "spectex/errors.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <random>
#include <sstream>

namespace spectex {

std::vector<double> SynthesisConfig::resolved_layer_weights() const {
    if (layer_weights.size() == 1) return std::vector<double>(layers.size(), layer_weights.front());
    if (layer_weights.size() != layers.size()) {
        throw ConfigError("got " + std::to_string(layer_weights.size()) + " layer weights for " +
                          std::to_string(layers.size()) + " layers");
    }
    return layer_weights;
}

bool SynthesisConfig::cnn_active() const {
    const auto w = resolved_layer_weights();
    return std::any_of(w.begin(), w.end(), [](double v) { return v > 0.0; });
}

void SynthesisConfig::validate() const {
    if (layers.empty()) throw ConfigError("at least one capture layer is required");
    for (double w : resolved_layer_weights()) {
        if (!(w >= 0.0) || !std::isfinite(w)) throw ConfigError("layer weights must be finite and >= 0");
    }
    if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be finite and >= 0");
    if (!cnn_active() && !spectrum_active()) {
        throw ConfigError("no active constraint: all layer weights are 0 and the spectrum term is off");
    }
    if (lbfgs_memory < 1) throw ConfigError("L-BFGS memory must be at least 1");
}

Tensor<double> image_to_tensor(const RgbImage& image) {
    Tensor<double> t(3, image.height, image.width);
    for (std::size_t y = 0; y < image.height; ++y) {
        for (std::size_t x = 0; x < image.width; ++x) {
            for (std::size_t c = 0; c < 3; ++c) t(c, y, x) = image.at(x, y, c);
        }
    }
    return t;
}

std::pair<std::size_t, std::size_t> rescaled_size(std::size_t width, std::size_t height, std::size_t scale) {
    if (width == 0 || height == 0) throw ConfigError("empty image");
    std::size_t w = width;
    std::size_t h = height;
    const std::size_t longest = std::max(width, height);
    if (scale != 0 && scale != longest) {
        const double factor = double(scale) / double(longest);
        w = width == longest ? scale : static_cast<std::size_t>(std::lround(double(width) * factor));
        h = height == longest ? scale : static_cast<std::size_t>(std::lround(double(height) * factor));
    }
    w -= w % 2;
    h -= h % 2;
    if (w < 2 || h < 2) {
        throw ConfigError("image of " + std::to_string(width) + "x" + std::to_string(height) +
                          " is too small after rescaling");
    }
    return {w, h};
}

Tensor<double> resize_bilinear(const Tensor<double>& image, std::size_t height, std::size_t width) {
    if (height == image.height() && width == image.width()) return image;
    Tensor<double> out(image.channels(), height, width);
    const double sy = double(image.height()) / double(height);
    const double sx = double(image.width()) / double(width);
    const double max_y = double(image.height() - 1);
    const double max_x = double(image.width() - 1);
    for (std::size_t y = 0; y < height; ++y) {
        const double fy = std::clamp((double(y) + 0.5) * sy - 0.5, 0.0, max_y);
        const auto y0 = static_cast<std::size_t>(fy);
        const std::size_t y1 = std::min(y0 + 1, image.height() - 1);
        const double ty = fy - double(y0);
        for (std::size_t x = 0; x < width; ++x) {
            const double fx = std::clamp((double(x) + 0.5) * sx - 0.5, 0.0, max_x);
            const auto x0 = static_cast<std::size_t>(fx);
            const std::size_t x1 = std::min(x0 + 1, image.width() - 1);
            const double tx = fx - double(x0);
            for (std::size_t c = 0; c < image.channels(); ++c) {
                const double top = image(c, y0, x0) * (1.0 - tx) + image(c, y0, x1) * tx;
                const double bottom = image(c, y1, x0) * (1.0 - tx) + image(c, y1, x1) * tx;
                out(c, y, x) = top * (1.0 - ty) + bottom * ty;
            }
        }
    }
    return out;
}

Tensor<double> preprocess(const RgbImage& image, const std::array<float, 3>& means, std::size_t scale) {
    const auto [w, h] = rescaled_size(image.width, image.height, scale);
    Tensor<double> t = image_to_tensor(image);
    const std::size_t longest = std::max(image.width, image.height);
    if (scale != 0 && scale != longest) {
        t = resize_bilinear(t, h, w);
    } else if (w != image.width || h != image.height) {
        // Unscaled odd sizes: drop the trailing row / column.
        Tensor<double> cropped(3, h, w);
        for (std::size_t c = 0; c < 3; ++c) {
            for (std::size_t y = 0; y < h; ++y) {
                for (std::size_t x = 0; x < w; ++x) cropped(c, y, x) = t(c, y, x);
            }
        }
        t = std::move(cropped);
    }
    for (std::size_t c = 0; c < 3; ++c) {
        for (auto& v : t.channel(c)) v -= double(means[c]);
    }
    return t;
}

RgbImage postprocess(const Tensor<double>& image, const std::array<double, 3>& means) {
    if (image.channels() != 3) throw ConfigError("postprocess needs a 3-channel image");
    RgbImage out{image.width(), image.height(), std::vector<std::uint8_t>(image.size())};
    for (std::size_t y = 0; y < image.height(); ++y) {
        for (std::size_t x = 0; x < image.width(); ++x) {
            for (std::size_t c = 0; c < 3; ++c) {
                const double v = std::clamp(image(c, y, x) + means[c], 0.0, 255.0);
                out.at(x, y, c) = static_cast<std::uint8_t>(std::lround(v));
            }
        }
    }
    return out;
}

std::vector<double> channel_std(const Tensor<double>& image) {
    std::vector<double> out;
    const double n = double(image.height() * image.width());
    for (std::size_t c = 0; c < image.channels(); ++c) {
        double mean = 0.0;
        for (double v : image.channel(c)) mean += v;
        mean /= n;
        double var = 0.0;
        for (double v : image.channel(c)) var += (v - mean) * (v - mean);
        out.push_back(std::sqrt(var / n));
    }
    return out;
}

Tensor<double> init_noise(const Shape& shape, std::uint64_t seed, std::span<const double> channel_std) {
    if (channel_std.size() != shape.channels) {
        throw ConfigError("init_noise: need one deviation per channel");
    }
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    Tensor<double> noise(shape);
    for (std::size_t c = 0; c < shape.channels; ++c) {
        for (auto& v : noise.channel(c)) v = channel_std[c] * normal(rng);
    }
    return noise;
}

template <typename T>
ExemplarTargets analyze_exemplar(const Tensor<double>& exemplar, const NetworkSpec<T>& net,
                                 const SynthesisConfig& config,
                                 const std::array<double, 3>& channel_means) {
    config.validate();
    ExemplarTargets targets;
    const auto trace = forward_capture(net, exemplar.template cast<T>());
    targets.gram = make_gram_target(trace, config.resolved_layer_weights());
    targets.spectrum = make_spectrum_target(exemplar);
    targets.shape = exemplar.shape();
    targets.channel_means = channel_means;
    targets.channel_std = channel_std(exemplar);
    return targets;
}

template <typename T>
ObjectiveValue evaluate_objective(const NetworkSpec<T>& net, const ExemplarTargets& targets,
                                  const SynthesisConfig& config, const Tensor<double>& image) {
    ObjectiveValue value;
    value.gradient = Tensor<double>(image.shape());
    if (config.cnn_active()) {
        const auto trace = forward_capture(net, image.template cast<T>());
        const auto loss = total_cnn_loss(targets.gram, trace);
        const auto g = backward_to_image(net, trace, loss.capture_grads);
        for (std::size_t i = 0; i < g.size(); ++i) value.gradient[i] = double(g[i]);
        value.cnn = loss.total;
    }
    // Skipped entirely at beta = 0 so that run matches a spectrum-free one bit for bit.
    if (config.spectrum_active()) {
        const auto spe = spectrum_loss_and_grad(image, targets.spectrum, config.phase_rule);
        value.gradient.add_scaled(spe.gradient, config.beta);
        value.spectrum = config.beta * spe.loss;
    }
    value.total = value.cnn + value.spectrum;
    return value;
}

template <typename T>
SynthesisResult synthesize_tensor(const Tensor<double>& exemplar, const NetworkSpec<T>& net,
                                  const SynthesisConfig& config,
                                  const std::array<double, 3>& channel_means,
                                  const ProgressCallback& progress) {
    const ExemplarTargets targets = analyze_exemplar(exemplar, net, config, channel_means);
    const Shape shape = targets.shape;

    SynthesisResult result;
    std::size_t iteration = 0;

    Objective objective = [&](std::span<const double> x, std::span<double> grad) {
        const Tensor<double> image(shape, std::vector<double>(x.begin(), x.end()));
        ObjectiveValue value = evaluate_objective(net, targets, config, image);
        std::copy(value.gradient.values().begin(), value.gradient.values().end(), grad.begin());
        LossRecord rec;
        rec.iteration = iteration;
        rec.evaluation = result.evaluations.size();
        rec.total = value.total;
        rec.cnn = value.cnn;
        rec.spectrum = value.spectrum;
        result.evaluations.push_back(rec);
        return rec.total;
    };

    OptimizerOptions options;
    options.memory = config.lbfgs_memory;
    options.max_iterations = config.iterations;
    options.gradient_tolerance = 0.0;
    options.on_iteration = [&](const IterationInfo& info) {
        LossRecord& rec = result.evaluations.back();
        rec.accepted = true;
        result.history.push_back(rec);
        iteration = info.iteration + 1;
        if (progress) {
            progress(rec, Tensor<double>(shape, std::vector<double>(info.x.begin(), info.x.end())));
        }
    };

    const std::vector<double> stds =
        config.unit_noise ? std::vector<double>(shape.channels, 1.0) : targets.channel_std;
    const Tensor<double> start = init_noise(shape, config.seed, stds);
    auto [x, report] = minimize(objective, std::vector<double>(start.values().begin(), start.values().end()),
                                options);
    result.image = Tensor<double>(shape, std::move(x));
    result.report = std::move(report);
    result.output = postprocess(result.image, channel_means);
    return result;
}

template <typename T>
SynthesisResult synthesize(const RgbImage& exemplar, const SynthesisConfig& config,
                           const WeightSet& weights, const ProgressCallback& progress) {
    config.validate();
    const auto net = build_truncated_vgg19<T>(weights, config.layers);
    const Tensor<double> pre = preprocess(exemplar, weights.channel_means, config.scale);
    const std::array<double, 3> means{weights.channel_means[0], weights.channel_means[1],
                                      weights.channel_means[2]};
    return synthesize_tensor<T>(pre, net, config, means, progress);
}

std::string format_loss_csv(std::span<const LossRecord> records) {
    std::ostringstream out;
    out << "iter,eval,total,cnn,spectrum,accepted\n";
    out << std::setprecision(17);
    for (const auto& r : records) {
        out << r.iteration << ',' << r.evaluation << ',' << r.total << ',' << r.cnn << ','
            << r.spectrum << ',' << (r.accepted ? 1 : 0) << '\n';
    }
    return out.str();
}

namespace {

std::vector<double> gray_of(const Tensor<double>& image) {
    std::vector<double> gray(image.height() * image.width(), 0.0);
    for (std::size_t c = 0; c < image.channels(); ++c) {
        const auto ch = image.channel(c);
        for (std::size_t i = 0; i < gray.size(); ++i) gray[i] += ch[i];
    }
    for (auto& v : gray) v /= double(image.channels());
    return gray;
}

} // namespace

std::vector<RadialBin> radial_spectrum_profile(const Tensor<double>& image) {
    const std::size_t h = image.height();
    const std::size_t w = image.width();
    const ComplexPlane f = dft2(gray_of(image), h, w);
    std::vector<double> sum;
    std::vector<std::size_t> count;
    for (std::size_t ky = 0; ky < h; ++ky) {
        const double fy = double(signed_frequency(ky, h));
        for (std::size_t kx = 0; kx < w; ++kx) {
            if (ky == 0 && kx == 0) continue;
            const double fx = double(signed_frequency(kx, w));
            const auto r = static_cast<std::size_t>(std::lround(std::sqrt(fy * fy + fx * fx)));
            if (r >= sum.size()) {
                sum.resize(r + 1, 0.0);
                count.resize(r + 1, 0);
            }
            sum[r] += std::norm(f(ky, kx));
            ++count[r];
        }
    }
    std::vector<RadialBin> profile;
    for (std::size_t r = 0; r < sum.size(); ++r) {
        if (count[r] > 0) profile.push_back({r, sum[r] / double(count[r])});
    }
    return profile;
}

std::size_t dominant_radius(std::span<const RadialBin> profile) {
    std::size_t best = 0;
    double best_power = -1.0;
    for (const auto& bin : profile) {
        if (bin.power > best_power) {
            best_power = bin.power;
            best = bin.radius;
        }
    }
    return best;
}

std::string format_radial_csv(std::span<const RadialBin> profile) {
    std::ostringstream out;
    out << "radius,power\n" << std::setprecision(17);
    for (const auto& bin : profile) out << bin.radius << ',' << bin.power << '\n';
    return out.str();
}

RgbImage log_magnitude_image(const Tensor<double>& image) {
    const std::size_t h = image.height();
    const std::size_t w = image.width();
    const ComplexPlane f = dft2(gray_of(image), h, w);
    std::vector<double> mag(h * w);
    double largest = 0.0;
    for (std::size_t y = 0; y < h; ++y) {
        for (std::size_t x = 0; x < w; ++x) {
            const std::size_t ky = (y + h - h / 2) % h;
            const std::size_t kx = (x + w - w / 2) % w;
            mag[y * w + x] = std::log1p(std::abs(f(ky, kx)));
            largest = std::max(largest, mag[y * w + x]);
        }
    }
    RgbImage out{w, h, std::vector<std::uint8_t>(w * h * 3, 0)};
    if (largest <= 0.0) return out;
    for (std::size_t i = 0; i < mag.size(); ++i) {
        const auto v = static_cast<std::uint8_t>(std::lround(255.0 * mag[i] / largest));
        for (std::size_t c = 0; c < 3; ++c) out.pixels[i * 3 + c] = v;
    }
    return out;
}

#define SPECTEX_INSTANTIATE(T)                                                                     \
    template ObjectiveValue evaluate_objective(const NetworkSpec<T>&, const ExemplarTargets&,       \
                                               const SynthesisConfig&, const Tensor<double>&);     \
    template ExemplarTargets analyze_exemplar(const Tensor<double>&, const NetworkSpec<T>&,        \
                                              const SynthesisConfig&, const std::array<double, 3>&); \
    template SynthesisResult synthesize_tensor(const Tensor<double>&, const NetworkSpec<T>&,       \
                                               const SynthesisConfig&, const std::array<double, 3>&, \
                                               const ProgressCallback&);                           \
    template SynthesisResult synthesize<T>(const RgbImage&, const SynthesisConfig&,                \
                                           const WeightSet&, const ProgressCallback&);

SPECTEX_INSTANTIATE(float)
SPECTEX_INSTANTIATE(double)

#undef SPECTEX_INSTANTIATE

} // namespace spectex

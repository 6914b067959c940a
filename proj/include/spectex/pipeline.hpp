#pragma once

#include "spectex/gram_loss.hpp"
#include "spectex/image_io.hpp"
#include "spectex/lbfgs.hpp"
#include "spectex/network.hpp"
#include "spectex/spectrum.hpp"
#include "spectex/tensor.hpp"
#include "spectex/weights_io.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace spectex {

struct SynthesisConfig {
    std::vector<std::string> layers = default_capture_layers();
    /// One weight per capture layer, or a single value used for all of them.
    std::vector<double> layer_weights = {1e9};
    double beta = 1e5;
    std::size_t iterations = 1000;
    std::uint64_t seed = 0;
    /// Longest side after rescaling; 0 keeps the exemplar size.
    std::size_t scale = 256;
    bool spectrum = true;
    PhaseRule phase_rule = PhaseRule::joint;
    /// Start from N(0, 1) noise instead of matching the exemplar's channel spread.
    bool unit_noise = false;
    std::size_t lbfgs_memory = 10;

    /// Per-layer weights expanded to the capture count.
    std::vector<double> resolved_layer_weights() const;
    bool cnn_active() const;
    bool spectrum_active() const { return spectrum && beta > 0.0; }

    /// Throws ConfigError on negative weights, bad counts, an empty capture
    /// set, or when neither constraint is active.
    void validate() const;
};

/// Reference-side statistics of a preprocessed exemplar.
struct ExemplarTargets {
    GramTarget gram;
    SpectrumTarget spectrum;
    Shape shape;
    std::array<double, 3> channel_means{};
    std::vector<double> channel_std;
};

/// Converts 8-bit RGB to a [3, H, W] tensor of values in [0, 255].
Tensor<double> image_to_tensor(const RgbImage& image);

/// Output size for `width` x `height` under the rescale rule: longest side
/// becomes `scale` (rounded), then each side is floored to even.
std::pair<std::size_t, std::size_t> rescaled_size(std::size_t width, std::size_t height, std::size_t scale);

/// Bilinear resample (pixel centres at +0.5) of every channel.
Tensor<double> resize_bilinear(const Tensor<double>& image, std::size_t height, std::size_t width);

/// Rescale, convert to reals, subtract the per-channel means.
Tensor<double> preprocess(const RgbImage& image, const std::array<float, 3>& means, std::size_t scale);

/// Adds the means back, clamps to [0, 255] and rounds.
RgbImage postprocess(const Tensor<double>& image, const std::array<double, 3>& means);

/// Population standard deviation of each channel.
std::vector<double> channel_std(const Tensor<double>& image);

/// I.i.d. zero-mean Gaussian noise with the given per-channel deviations.
Tensor<double> init_noise(const Shape& shape, std::uint64_t seed, std::span<const double> channel_std);

template <typename T>
ExemplarTargets analyze_exemplar(const Tensor<double>& exemplar, const NetworkSpec<T>& net,
                                 const SynthesisConfig& config,
                                 const std::array<double, 3>& channel_means = {});

/// L = L_cnn + beta * L_spe and its image gradient at one point.
struct ObjectiveValue {
    double total = 0.0;
    double cnn = 0.0;
    double spectrum = 0.0; // beta * L_spe
    Tensor<double> gradient;
};

/// The synthesis objective. The network runs in precision T; the spectrum
/// term and the returned gradient are double.
template <typename T>
ObjectiveValue evaluate_objective(const NetworkSpec<T>& net, const ExemplarTargets& targets,
                                  const SynthesisConfig& config, const Tensor<double>& image);

/// One objective evaluation. `spectrum` holds beta * L_spe.
struct LossRecord {
    std::size_t iteration = 0;
    std::size_t evaluation = 0;
    double total = 0.0;
    double cnn = 0.0;
    double spectrum = 0.0;
    bool accepted = false;
};

struct SynthesisResult {
    Tensor<double> image; // optimised, before postprocessing
    RgbImage output;
    std::vector<LossRecord> history;     // accepted points only
    std::vector<LossRecord> evaluations; // every objective call
    OptimizerReport report;
};

/// Called at the start point and after each accepted step.
using ProgressCallback = std::function<void(const LossRecord&, const Tensor<double>& image)>;

/// Minimises L = L_cnn + beta * L_spe from seeded noise. `exemplar` is the
/// preprocessed tensor; `channel_means` are added back to form the output.
template <typename T>
SynthesisResult synthesize_tensor(const Tensor<double>& exemplar, const NetworkSpec<T>& net,
                                  const SynthesisConfig& config,
                                  const std::array<double, 3>& channel_means,
                                  const ProgressCallback& progress = {});

/// Full pipeline from an 8-bit exemplar and a VGG-19 weight set.
template <typename T>
SynthesisResult synthesize(const RgbImage& exemplar, const SynthesisConfig& config,
                           const WeightSet& weights, const ProgressCallback& progress = {});

/// Writes `iter,eval,total,cnn,spectrum,accepted` rows.
std::string format_loss_csv(std::span<const LossRecord> records);

struct RadialBin {
    std::size_t radius = 0;
    double power = 0.0;
};

/// Mean of |F(gray)|^2 over integer-radius annuli, DC excluded. Radii are
/// measured in frequency bins; empty annuli are omitted.
std::vector<RadialBin> radial_spectrum_profile(const Tensor<double>& image);

/// Radius of the strongest annulus (0 for an empty profile).
std::size_t dominant_radius(std::span<const RadialBin> profile);

std::string format_radial_csv(std::span<const RadialBin> profile);

/// log(1 + |F(gray)|) with DC at the centre, scaled to [0, 255].
RgbImage log_magnitude_image(const Tensor<double>& image);

} // namespace spectex

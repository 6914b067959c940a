#pragma once

#include "spectex/image_io.hpp"
#include "spectex/weights_io.hpp"

#include <string>
#include <vector>

namespace spectex {

// Cross-checks against the activations an exporter records in its manifest.
// The reference forward pass uses average pooling, feeds the test image with
// the container's channel means subtracted and no rescaling, and records the
// rectified conv1_1 output and the pool4 output.

/// Built-in 64x64 test image: value(x, y, c) = (3x + 5y + 85c) mod 256.
RgbImage reference_test_image();

struct ActivationStats {
    std::string capture;
    double sum = 0.0;
    double l2 = 0.0;
};

/// Sum and L2 norm of each capture for `image`, computed in double.
std::vector<ActivationStats> reference_activations(const WeightSet& weights, const RgbImage& image,
                                                   const std::vector<std::string>& captures = {"conv1_1", "pool4"});

/// Writes `layers`, `checksum.*`, `reference.image` and `reference.*` keys.
Manifest make_manifest(const WeightSet& weights, const RgbImage& image,
                       const std::string& image_label = "builtin");

struct ReferenceCheck {
    std::string capture;
    double expected_l2 = 0.0;
    double actual_l2 = 0.0;
    double relative_error = 0.0;
    bool passed = false;
};

/// Compares engine activation norms with every `reference.<capture>.l2` key.
/// Throws WeightFormatError if the manifest has no reference entries.
std::vector<ReferenceCheck> check_reference_activations(const WeightSet& weights, const Manifest& manifest,
                                                        const RgbImage& image, double tolerance = 1e-4);

} // namespace spectex

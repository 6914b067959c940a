#include "spectex/reference.hpp"

#include "spectex/errors.hpp"
#include "spectex/network.hpp"
#include "spectex/pipeline.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

namespace spectex {

namespace {

std::string format_real(double v) {
    std::ostringstream out;
    out.precision(17);
    out << v;
    return out.str();
}

double parse_real(const Manifest& manifest, const std::string& key) {
    const auto it = manifest.find(key);
    if (it == manifest.end()) throw WeightFormatError("manifest lacks " + key);
    try {
        std::size_t used = 0;
        const double v = std::stod(it->second, &used);
        if (used != it->second.size()) throw std::invalid_argument(key);
        return v;
    } catch (const std::exception&) {
        throw WeightFormatError("manifest " + key + " is not a number");
    }
}

} // namespace

RgbImage reference_test_image() {
    RgbImage image{64, 64, std::vector<std::uint8_t>(64 * 64 * 3)};
    for (std::size_t y = 0; y < 64; ++y) {
        for (std::size_t x = 0; x < 64; ++x) {
            for (std::size_t c = 0; c < 3; ++c) image.at(x, y, c) = static_cast<std::uint8_t>((3 * x + 5 * y + 85 * c) % 256);
        }
    }
    return image;
}

std::vector<ActivationStats> reference_activations(const WeightSet& weights, const RgbImage& image,
                                                   const std::vector<std::string>& captures) {
    const auto net = build_vgg_chain<double>(weights, captures);
    const Tensor<double> input = preprocess(image, weights.channel_means, 0);
    const auto trace = forward_capture(net, input);
    std::vector<ActivationStats> stats;
    for (const auto& name : net.captures()) {
        ActivationStats s{name, 0.0, 0.0};
        for (double v : trace.captured(name).values()) {
            s.sum += v;
            s.l2 += v * v;
        }
        s.l2 = std::sqrt(s.l2);
        stats.push_back(s);
    }
    return stats;
}

Manifest make_manifest(const WeightSet& weights, const RgbImage& image, const std::string& image_label) {
    Manifest m;
    std::string layers;
    for (const auto& rec : weights.records) {
        if (!layers.empty()) layers += ',';
        layers += rec.name;
        char hex[9];
        std::snprintf(hex, sizeof hex, "%08x", record_checksum(rec));
        m["checksum." + rec.name] = hex;
    }
    m["layers"] = layers;
    m["reference.image"] = image_label;
    for (const auto& s : reference_activations(weights, image)) {
        m["reference." + s.capture + ".sum"] = format_real(s.sum);
        m["reference." + s.capture + ".l2"] = format_real(s.l2);
    }
    return m;
}

std::vector<ReferenceCheck> check_reference_activations(const WeightSet& weights, const Manifest& manifest,
                                                        const RgbImage& image, double tolerance) {
    std::vector<std::string> captures;
    for (const auto& [key, value] : manifest) {
        if (key.starts_with("reference.") && key.ends_with(".l2")) {
            captures.push_back(key.substr(10, key.size() - 13));
        }
    }
    if (captures.empty()) throw WeightFormatError("manifest has no reference activations");
    const auto stats = reference_activations(weights, image, captures);
    std::vector<ReferenceCheck> checks;
    for (const auto& s : stats) {
        ReferenceCheck c;
        c.capture = s.capture;
        c.expected_l2 = parse_real(manifest, "reference." + s.capture + ".l2");
        c.actual_l2 = s.l2;
        const double denom = std::max(std::abs(c.expected_l2), 1e-300);
        c.relative_error = c.expected_l2 == 0.0 && c.actual_l2 == 0.0 ? 0.0 : std::abs(c.actual_l2 - c.expected_l2) / denom;
        c.passed = c.relative_error < tolerance;
        checks.push_back(c);
    }
    return checks;
}

} // namespace spectex

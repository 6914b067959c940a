#pragma once

#include "spectex/tensor.hpp"
#include "spectex/weights_io.hpp"

#include <map>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace spectex {

enum class LayerKind { conv, relu, avgpool };

template <typename T>
struct LayerSpec {
    LayerKind kind = LayerKind::conv;
    std::string name;
    std::shared_ptr<const ConvWeights<T>> weights; // conv layers only
};

/// Lower-cases a layer name and maps the long pooling form ("Pooling3") to
/// the short one ("pool3").
std::string canonical_layer_name(std::string_view name);

/// Default capture set: conv1_1 and the outputs of pool1..pool4.
std::vector<std::string> default_capture_layers();

/// A straight chain of conv/relu/avgpool layers with named capture points.
///
/// Capturing a conv layer reads the rectified output, i.e. the relu that
/// follows it. Immutable once built.
template <typename T>
class NetworkSpec {
public:
    NetworkSpec(std::vector<LayerSpec<T>> layers, std::vector<std::string> captures);

    std::span<const LayerSpec<T>> layers() const noexcept { return layers_; }
    std::span<const std::string> captures() const noexcept { return captures_; }

    /// Index of the layer whose output a capture name reads.
    std::size_t capture_layer(std::string_view capture) const;

    std::size_t input_channels() const noexcept;

private:
    std::vector<LayerSpec<T>> layers_;
    std::vector<std::string> captures_;
    std::vector<std::size_t> capture_layers_;
};

/// VGG-19 feature chain (average pooling) up to the deepest capture layer,
/// taking channel widths from `weights`. Each needed conv record must be
/// present and chain with its predecessor; shapes are not checked against
/// the published widths, which lets tests run small random networks.
template <typename T>
NetworkSpec<T> build_vgg_chain(const WeightSet& weights, std::span<const std::string> captures);

/// As build_vgg_chain, after validating the records against the published
/// VGG-19 shapes.
template <typename T>
NetworkSpec<T> build_truncated_vgg19(const WeightSet& weights, std::span<const std::string> captures);

/// Name of the last conv layer a capture set needs.
std::string deepest_conv_for(std::span<const std::string> captures);

struct CaptureDims {
    std::size_t maps = 0;    // m_l
    std::size_t stimuli = 0; // N_l
};

/// Activations of one forward pass.
template <typename T>
class ForwardTrace {
public:
    ForwardTrace() = default;
    ForwardTrace(Tensor<T> input, std::vector<Tensor<T>> outputs,
                 std::vector<std::pair<std::string, std::size_t>> capture_index)
        : input_(std::move(input)), outputs_(std::move(outputs)),
          capture_index_(std::move(capture_index)) {}

    const Tensor<T>& input() const noexcept { return input_; }
    /// Output of layer `i`.
    const Tensor<T>& output(std::size_t i) const { return outputs_.at(i); }
    std::size_t layer_count() const noexcept { return outputs_.size(); }

    const Tensor<T>& captured(std::string_view name) const;
    CaptureDims dims(std::string_view name) const;
    std::span<const std::pair<std::string, std::size_t>> captures() const noexcept {
        return capture_index_;
    }

    friend bool operator==(const ForwardTrace&, const ForwardTrace&) = default;

private:
    Tensor<T> input_;
    std::vector<Tensor<T>> outputs_;
    std::vector<std::pair<std::string, std::size_t>> capture_index_;
};

template <typename T>
ForwardTrace<T> forward_capture(const NetworkSpec<T>& net, const Tensor<T>& image);

/// Back-propagates per-capture gradients to the image. Gradients are injected
/// additively at their layer while walking the chain deepest-first.
template <typename T>
Tensor<T> backward_to_image(const NetworkSpec<T>& net, const ForwardTrace<T>& trace,
                            const std::map<std::string, Tensor<T>>& capture_grads);

} // namespace spectex

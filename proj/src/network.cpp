#include "spectex/network.hpp"

#include "spectex/errors.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace spectex {

namespace {

struct TopologyEntry {
    LayerKind kind;
    std::string name;
};

// VGG-19 convolutional part: blocks of 2, 2, 4, 4, 4 convs, each conv
// followed by a relu and each block closed by a pool.
const std::vector<TopologyEntry>& vgg19_topology() {
    static const std::vector<TopologyEntry> topology = [] {
        constexpr std::array<int, 5> block_convs{2, 2, 4, 4, 4};
        std::vector<TopologyEntry> t;
        for (std::size_t b = 0; b < block_convs.size(); ++b) {
            const std::string block = std::to_string(b + 1);
            for (int i = 1; i <= block_convs[b]; ++i) {
                const std::string suffix = block + "_" + std::to_string(i);
                t.push_back({LayerKind::conv, "conv" + suffix});
                t.push_back({LayerKind::relu, "relu" + suffix});
            }
            t.push_back({LayerKind::avgpool, "pool" + block});
        }
        return t;
    }();
    return topology;
}

std::size_t topology_index(const std::string& name) {
    const auto& topo = vgg19_topology();
    for (std::size_t i = 0; i < topo.size(); ++i) {
        if (topo[i].name == name) {
            // A conv capture reads the rectified output.
            return topo[i].kind == LayerKind::conv ? i + 1 : i;
        }
    }
    throw ConfigError("unknown capture layer '" + name + "'");
}

std::size_t deepest_index(std::span<const std::string> captures) {
    if (captures.empty()) throw ConfigError("capture set is empty");
    std::size_t deepest = 0;
    for (const auto& c : captures) deepest = std::max(deepest, topology_index(canonical_layer_name(c)));
    return deepest;
}

} // namespace

std::string canonical_layer_name(std::string_view name) {
    std::string out(name);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    if (out.starts_with("pooling")) out = "pool" + out.substr(7);
    return out;
}

std::vector<std::string> default_capture_layers() {
    return {"conv1_1", "pool1", "pool2", "pool3", "pool4"};
}

std::string deepest_conv_for(std::span<const std::string> captures) {
    const auto& topo = vgg19_topology();
    for (std::size_t i = deepest_index(captures) + 1; i-- > 0;) {
        if (topo[i].kind == LayerKind::conv) return topo[i].name;
    }
    throw ConfigError("capture set needs no convolution");
}

template <typename T>
NetworkSpec<T>::NetworkSpec(std::vector<LayerSpec<T>> layers, std::vector<std::string> captures)
    : layers_(std::move(layers)) {
    if (layers_.empty()) throw ConfigError("network has no layers");
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        for (std::size_t j = 0; j < i; ++j) {
            if (layers_[i].name == layers_[j].name) {
                throw ConfigError("duplicate layer name '" + layers_[i].name + "'");
            }
        }
        if (layers_[i].kind == LayerKind::conv && !layers_[i].weights) {
            throw ConfigError("conv layer '" + layers_[i].name + "' has no weights");
        }
    }
    if (captures.empty()) throw ConfigError("capture set is empty");
    for (auto& name : captures) {
        name = canonical_layer_name(name);
        if (std::find(captures_.begin(), captures_.end(), name) != captures_.end()) {
            throw ConfigError("capture layer '" + name + "' listed twice");
        }
        std::size_t idx = layers_.size();
        for (std::size_t i = 0; i < layers_.size(); ++i) {
            if (layers_[i].name != name) continue;
            idx = i;
            if (layers_[i].kind == LayerKind::conv && i + 1 < layers_.size() &&
                layers_[i + 1].kind == LayerKind::relu) {
                idx = i + 1;
            }
            break;
        }
        if (idx == layers_.size()) throw ConfigError("capture layer '" + name + "' not in network");
        captures_.push_back(name);
        capture_layers_.push_back(idx);
    }
}

template <typename T>
std::size_t NetworkSpec<T>::capture_layer(std::string_view capture) const {
    const std::string name = canonical_layer_name(capture);
    for (std::size_t i = 0; i < captures_.size(); ++i) {
        if (captures_[i] == name) return capture_layers_[i];
    }
    throw ConfigError("'" + name + "' is not a capture layer");
}

template <typename T>
std::size_t NetworkSpec<T>::input_channels() const noexcept {
    for (const auto& l : layers_) {
        if (l.kind == LayerKind::conv) return l.weights->in_channels();
    }
    return 0;
}

template <typename T>
NetworkSpec<T> build_vgg_chain(const WeightSet& weights, std::span<const std::string> captures) {
    const std::size_t last = deepest_index(captures);
    const auto& topo = vgg19_topology();
    std::vector<LayerSpec<T>> layers;
    std::size_t channels = 3;
    for (std::size_t i = 0; i <= last; ++i) {
        LayerSpec<T> layer{topo[i].kind, topo[i].name, nullptr};
        if (layer.kind == LayerKind::conv) {
            const WeightRecord* rec = weights.find(layer.name);
            if (!rec) throw WeightValidationError(layer.name, "record missing");
            if (rec->kernel_height != 3 || rec->kernel_width != 3) {
                throw WeightValidationError(layer.name, "kernel must be 3x3");
            }
            if (rec->in_channels != channels) {
                throw WeightValidationError(layer.name, "C_in " + std::to_string(rec->in_channels) +
                                                            ", previous layer gives " +
                                                            std::to_string(channels));
            }
            layer.weights = std::make_shared<const ConvWeights<T>>(
                rec->out_channels, rec->in_channels,
                std::vector<T>(rec->kernel.begin(), rec->kernel.end()),
                std::vector<T>(rec->bias.begin(), rec->bias.end()));
            channels = rec->out_channels;
        }
        layers.push_back(std::move(layer));
    }
    return NetworkSpec<T>(std::move(layers), std::vector<std::string>(captures.begin(), captures.end()));
}

template <typename T>
NetworkSpec<T> build_truncated_vgg19(const WeightSet& weights, std::span<const std::string> captures) {
    const auto expected = vgg19_expected_layers(deepest_conv_for(captures));
    validate_against(weights, expected);
    return build_vgg_chain<T>(weights, captures);
}

template <typename T>
const Tensor<T>& ForwardTrace<T>::captured(std::string_view name) const {
    const std::string key = canonical_layer_name(name);
    for (const auto& [capture, idx] : capture_index_) {
        if (capture == key) return outputs_.at(idx);
    }
    throw ConfigError("trace holds no capture '" + key + "'");
}

template <typename T>
CaptureDims ForwardTrace<T>::dims(std::string_view name) const {
    const auto& f = captured(name);
    return {f.channels(), f.height() * f.width()};
}

template <typename T>
ForwardTrace<T> forward_capture(const NetworkSpec<T>& net, const Tensor<T>& image) {
    if (image.channels() != 3 || image.channels() != net.input_channels()) {
        throw ConfigError("forward_capture: expected a 3-channel image, got " +
                          std::to_string(image.channels()) + " channels");
    }
    std::size_t last = 0;
    std::vector<std::pair<std::string, std::size_t>> index;
    for (const auto& name : net.captures()) {
        const std::size_t idx = net.capture_layer(name);
        index.emplace_back(name, idx);
        last = std::max(last, idx);
    }

    std::vector<Tensor<T>> outputs;
    outputs.reserve(last + 1);
    const auto layers = net.layers();
    for (std::size_t i = 0; i <= last; ++i) {
        const Tensor<T>& in = i == 0 ? image : outputs.back();
        switch (layers[i].kind) {
        case LayerKind::conv:
            outputs.push_back(conv2d_forward(in, *layers[i].weights));
            break;
        case LayerKind::relu:
            outputs.push_back(relu_forward(in));
            break;
        case LayerKind::avgpool:
            outputs.push_back(avgpool_forward(in));
            break;
        }
    }
    return ForwardTrace<T>(image, std::move(outputs), std::move(index));
}

template <typename T>
Tensor<T> backward_to_image(const NetworkSpec<T>& net, const ForwardTrace<T>& trace,
                            const std::map<std::string, Tensor<T>>& capture_grads) {
    const auto layers = net.layers();
    std::vector<const Tensor<T>*> injected(trace.layer_count(), nullptr);
    for (const auto& [name, grad] : capture_grads) {
        const std::size_t idx = net.capture_layer(name);
        if (idx >= trace.layer_count()) throw ConfigError("trace is shorter than capture " + name);
        if (grad.shape() != trace.output(idx).shape()) {
            throw ConfigError("gradient for '" + name + "' does not match its feature map shape");
        }
        injected[idx] = &grad;
    }

    std::size_t top = trace.layer_count();
    while (top > 0 && !injected[top - 1]) --top;
    if (top == 0) return Tensor<T>(trace.input().shape());

    Tensor<T> grad = *injected[top - 1];
    for (std::size_t i = top; i-- > 0;) {
        if (i + 1 < top && injected[i]) grad.add_scaled(*injected[i], T{1});
        const Tensor<T>& in = i == 0 ? trace.input() : trace.output(i - 1);
        switch (layers[i].kind) {
        case LayerKind::conv:
            grad = conv2d_backward_data(grad, *layers[i].weights);
            break;
        case LayerKind::relu:
            grad = relu_backward(grad, in);
            break;
        case LayerKind::avgpool:
            grad = avgpool_backward(grad, in.shape());
            break;
        }
    }
    return grad;
}

#define SPECTEX_INSTANTIATE(T)                                                                  \
    template class NetworkSpec<T>;                                                              \
    template class ForwardTrace<T>;                                                             \
    template NetworkSpec<T> build_vgg_chain<T>(const WeightSet&, std::span<const std::string>); \
    template NetworkSpec<T> build_truncated_vgg19<T>(const WeightSet&,                          \
                                                     std::span<const std::string>);             \
    template ForwardTrace<T> forward_capture(const NetworkSpec<T>&, const Tensor<T>&);          \
    template Tensor<T> backward_to_image(const NetworkSpec<T>&, const ForwardTrace<T>&,         \
                                         const std::map<std::string, Tensor<T>>&);

SPECTEX_INSTANTIATE(float)
SPECTEX_INSTANTIATE(double)

#undef SPECTEX_INSTANTIATE

} // namespace spectex

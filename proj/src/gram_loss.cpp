#include "spectex/gram_loss.hpp"

#include "spectex/errors.hpp"

namespace spectex {

template <typename T>
GramMatrix gram_matrix(const Tensor<T>& f) {
    const std::size_t m = f.channels();
    const std::size_t n = f.height() * f.width();
    GramMatrix g(m, n);
    const auto maps = static_cast<long>(m);
#pragma omp parallel for schedule(dynamic)
    for (long lp = 0; lp < maps; ++lp) {
        const auto p = static_cast<std::size_t>(lp);
        const T* fp = f.data() + p * n;
        for (std::size_t q = p; q < m; ++q) {
            const T* fq = f.data() + q * n;
            double sum = 0.0;
            for (std::size_t i = 0; i < n; ++i) sum += double(fp[i]) * double(fq[i]);
            g(p, q) = sum;
        }
    }
    for (std::size_t p = 0; p < m; ++p) {
        for (std::size_t q = 0; q < p; ++q) g(p, q) = g(q, p);
    }
    return g;
}

double layer_loss(const GramMatrix& target, const GramMatrix& generated) {
    if (target.maps() != generated.maps() || target.stimuli() != generated.stimuli()) {
        throw ConfigError("layer_loss: Gram dimensions differ (" + std::to_string(target.maps()) +
                          "/" + std::to_string(target.stimuli()) + " vs " +
                          std::to_string(generated.maps()) + "/" +
                          std::to_string(generated.stimuli()) + ")");
    }
    const double m = double(target.maps());
    const double n = double(target.stimuli());
    double sum = 0.0;
    const auto a = target.values();
    const auto b = generated.values();
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        sum += d * d;
    }
    return sum / (4.0 * n * n * m * m);
}

template <typename T>
Tensor<T> layer_loss_grad(const Tensor<T>& features, const GramMatrix& target,
                          const GramMatrix& generated) {
    const std::size_t m = features.channels();
    const std::size_t n = features.height() * features.width();
    if (target.maps() != m || generated.maps() != m || target.stimuli() != n ||
        generated.stimuli() != n) {
        throw ConfigError("layer_loss_grad: feature map " + std::to_string(m) + "x" +
                          std::to_string(n) + " does not match Gram dimensions");
    }
    const double scale = 1.0 / (double(n) * double(n) * double(m) * double(m));
    std::vector<T> diff(m * m);
    for (std::size_t p = 0; p < m; ++p) {
        for (std::size_t q = 0; q < m; ++q) {
            diff[p * m + q] = static_cast<T>(scale * (generated(p, q) - target(p, q)));
        }
    }

    Tensor<T> grad(features.shape());
    const auto maps = static_cast<long>(m);
#pragma omp parallel for schedule(static)
    for (long lp = 0; lp < maps; ++lp) {
        const auto p = static_cast<std::size_t>(lp);
        T* __restrict out = grad.data() + p * n;
        for (std::size_t q = 0; q < m; ++q) {
            const T d = diff[p * m + q];
            if (d == T{0}) continue;
            const T* __restrict fq = features.data() + q * n;
            for (std::size_t i = 0; i < n; ++i) out[i] += d * fq[i];
        }
    }
    return grad;
}

const LayerTarget* GramTarget::find(std::string_view name) const {
    const std::string key = canonical_layer_name(name);
    for (const auto& l : layers) {
        if (l.name == key) return &l;
    }
    return nullptr;
}

template <typename T>
GramTarget make_gram_target(const ForwardTrace<T>& trace, std::span<const double> weights) {
    const auto captures = trace.captures();
    if (weights.size() != captures.size()) {
        throw ConfigError("got " + std::to_string(weights.size()) + " layer weights for " +
                          std::to_string(captures.size()) + " capture layers");
    }
    GramTarget target;
    for (std::size_t i = 0; i < captures.size(); ++i) {
        if (!(weights[i] >= 0.0)) throw ConfigError("layer weights must be non-negative");
        target.layers.push_back({captures[i].first, gram_matrix(trace.captured(captures[i].first)), weights[i]});
    }
    return target;
}

template <typename T>
CnnLoss<T> total_cnn_loss(const GramTarget& targets, const ForwardTrace<T>& trace) {
    CnnLoss<T> result;
    for (const auto& layer : targets.layers) {
        const Tensor<T>& f = trace.captured(layer.name); // throws for a missing layer
        const GramMatrix g = gram_matrix(f);
        const double e = layer_loss(layer.gram, g);
        result.layer_losses[layer.name] = e;
        if (layer.weight == 0.0) continue;
        result.total += layer.weight * e;
        Tensor<T> grad = layer_loss_grad(f, layer.gram, g);
        const T w = static_cast<T>(layer.weight);
        for (auto& v : grad.values()) v *= w;
        result.capture_grads.emplace(layer.name, std::move(grad));
    }
    return result;
}

#define SPECTEX_INSTANTIATE(T)                                                                \
    template GramMatrix gram_matrix(const Tensor<T>&);                                        \
    template Tensor<T> layer_loss_grad(const Tensor<T>&, const GramMatrix&, const GramMatrix&); \
    template GramTarget make_gram_target(const ForwardTrace<T>&, std::span<const double>);    \
    template CnnLoss<T> total_cnn_loss(const GramTarget&, const ForwardTrace<T>&);

SPECTEX_INSTANTIATE(float)
SPECTEX_INSTANTIATE(double)

#undef SPECTEX_INSTANTIATE

} // namespace spectex

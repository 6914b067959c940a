#pragma once

#include "spectex/network.hpp"
#include "spectex/tensor.hpp"

#include <map>
#include <string>
#include <vector>

namespace spectex {

/// Unnormalised feature correlations G[p,q] = sum_i f_p(i) f_q(i) of one
/// layer. Stored in double regardless of the network precision.
class GramMatrix {
public:
    GramMatrix() = default;
    GramMatrix(std::size_t maps, std::size_t stimuli)
        : maps_(maps), stimuli_(stimuli), values_(maps * maps, 0.0) {}

    std::size_t maps() const noexcept { return maps_; }       // m_l
    std::size_t stimuli() const noexcept { return stimuli_; } // N_l

    double& operator()(std::size_t p, std::size_t q) noexcept { return values_[p * maps_ + q]; }
    double operator()(std::size_t p, std::size_t q) const noexcept { return values_[p * maps_ + q]; }
    std::span<const double> values() const noexcept { return values_; }

    friend bool operator==(const GramMatrix&, const GramMatrix&) = default;

private:
    std::size_t maps_ = 0;
    std::size_t stimuli_ = 0;
    std::vector<double> values_;
};

/// Correlations of the feature map `f`, read as `channels` maps over
/// height*width stimuli. Only p <= q is summed; the rest is mirrored.
template <typename T>
GramMatrix gram_matrix(const Tensor<T>& f);

/// E_l = 1/(4 N_l^2 m_l^2) * sum_{p,q} (G[p,q] - Ghat[p,q])^2
double layer_loss(const GramMatrix& target, const GramMatrix& generated);

/// dE_l/dfhat_p(i) = 1/(N_l^2 m_l^2) * sum_q fhat_q(i) (Ghat[p,q] - G[p,q]).
///
/// `generated` must be gram_matrix(`features`). No rectifier mask is applied
/// here; it is part of relu_backward.
template <typename T>
Tensor<T> layer_loss_grad(const Tensor<T>& features, const GramMatrix& target,
                          const GramMatrix& generated);

struct LayerTarget {
    std::string name;
    GramMatrix gram;
    double weight = 1e9;
};

/// Exemplar statistics, one entry per capture layer in capture order.
struct GramTarget {
    std::vector<LayerTarget> layers;

    const LayerTarget* find(std::string_view name) const;
};

/// Gram matrices of every capture in `trace`, weighted by `weights`
/// (one per capture, in capture order).
template <typename T>
GramTarget make_gram_target(const ForwardTrace<T>& trace, std::span<const double> weights);

template <typename T>
struct CnnLoss {
    double total = 0.0;
    std::map<std::string, double> layer_losses;      // unweighted E_l
    std::map<std::string, Tensor<T>> capture_grads; // w_l * dE_l/dfhat
};

/// L_cnn = sum_l w_l E_l and the per-capture gradients for backward_to_image.
/// Layers with zero weight contribute nothing and get no gradient entry.
template <typename T>
CnnLoss<T> total_cnn_loss(const GramTarget& targets, const ForwardTrace<T>& trace);

} // namespace spectex

#pragma once

#include <cmath>
#include <utility>

#include "dfdm/tensor.hpp"

namespace dfdm {

enum class LossKind { hinge, bce };

template <typename T>
struct LossResult {
    T loss;
    Tensor<T> grad;
};

/// Mean hinge loss over +/-1 targets: mean(max(0, 1 - y*s)). The subgradient
/// at a margin of exactly 1 is taken as 0.
template <typename T>
LossResult<T> hinge_loss(const Tensor<T>& scores, const Tensor<T>& targets) {
    if (!scores.same_shape(targets)) {
        throw ShapeError("hinge: scores " + shape_str(scores.shape()) + " vs targets " +
                         shape_str(targets.shape()));
    }
    const std::size_t n = scores.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (targets[i] != T(1) && targets[i] != T(-1)) {
            throw ShapeError("hinge: target at index " + std::to_string(i) +
                             " is not in {-1,+1}");
        }
    }
    T loss = 0;
    Tensor<T> grad(scores.shape());
    const T inv_n = T(1) / static_cast<T>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const T margin = T(1) - targets[i] * scores[i];
        if (margin > T(0)) {
            loss += margin;
            grad[i] = -targets[i] * inv_n;
        }
    }
    return {loss * inv_n, std::move(grad)};
}

inline constexpr double kBceClamp = 1e-7;

/// Mean binary cross-entropy over {0,1} targets and predicted probabilities.
/// Probabilities are clamped to [1e-7, 1-1e-7] before the log so saturated
/// sigmoids stay finite.
template <typename T>
LossResult<T> bce_loss(const Tensor<T>& probs, const Tensor<T>& targets) {
    if (!probs.same_shape(targets)) {
        throw ShapeError("bce: probs " + shape_str(probs.shape()) + " vs targets " +
                         shape_str(targets.shape()));
    }
    const std::size_t n = probs.size();
    for (std::size_t i = 0; i < n; ++i) {
        if (targets[i] != T(0) && targets[i] != T(1)) {
            throw ShapeError("bce: target at index " + std::to_string(i) + " is not in {0,1}");
        }
    }
    T loss = 0;
    Tensor<T> grad(probs.shape());
    const T lo = T(kBceClamp), hi = T(1) - T(kBceClamp);
    const T inv_n = T(1) / static_cast<T>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const T p = probs[i] < lo ? lo : (probs[i] > hi ? hi : probs[i]);
        loss += -targets[i] * std::log(p) - (T(1) - targets[i]) * std::log(T(1) - p);
        grad[i] = (-targets[i] / p + (T(1) - targets[i]) / (T(1) - p)) * inv_n;
    }
    return {loss * inv_n, std::move(grad)};
}

/// Adam with bias-corrected first/second moments. Moment tensors mirror the
/// parameter list and are lazily allocated on the first apply.
template <typename T>
class Adam {
public:
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    Adam() = default;
    Adam(double lr_, double b1, double b2, double eps)
        : lr(lr_), beta1(b1), beta2(b2), epsilon(eps) {}

    std::uint64_t step_count() const { return t_; }

    /// One update over a parameter list; grads[i] must mirror params[i].
    void apply(const std::vector<Tensor<T>*>& params, const std::vector<const Tensor<T>*>& grads) {
        if (params.size() != grads.size()) {
            throw ShapeError("adam: " + std::to_string(params.size()) + " params vs " +
                             std::to_string(grads.size()) + " grads");
        }
        if (m_.empty()) {
            for (const Tensor<T>* p : params) {
                m_.emplace_back(p->shape());
                v_.emplace_back(p->shape());
            }
        }
        if (m_.size() != params.size()) {
            throw ShapeError("adam: parameter count changed between steps");
        }
        t_ += 1;
        const T b1 = T(beta1), b2 = T(beta2);
        const T bc1 = T(1) - static_cast<T>(std::pow(beta1, static_cast<double>(t_)));
        const T bc2 = T(1) - static_cast<T>(std::pow(beta2, static_cast<double>(t_)));
        for (std::size_t i = 0; i < params.size(); ++i) {
            Tensor<T>& p = *params[i];
            const Tensor<T>& g = *grads[i];
            if (!p.same_shape(g)) {
                throw ShapeError("adam: param " + shape_str(p.shape()) + " vs grad " +
                                 shape_str(g.shape()));
            }
            if (!m_[i].same_shape(p)) {
                throw ShapeError("adam: moment " + shape_str(m_[i].shape()) +
                                 " does not mirror param " + shape_str(p.shape()));
            }
            for (std::size_t j = 0; j < p.size(); ++j) {
                m_[i][j] = b1 * m_[i][j] + (T(1) - b1) * g[j];
                v_[i][j] = b2 * v_[i][j] + (T(1) - b2) * g[j] * g[j];
                const T mhat = m_[i][j] / bc1;
                const T vhat = v_[i][j] / bc2;
                p[j] -= T(lr) * mhat / (std::sqrt(vhat) + T(epsilon));
            }
        }
    }

private:
    std::uint64_t t_ = 0;
    std::vector<Tensor<T>> m_;
    std::vector<Tensor<T>> v_;
};

}  // namespace dfdm

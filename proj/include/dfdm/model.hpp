#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "dfdm/label.hpp"
#include "dfdm/layers.hpp"
#include "dfdm/loss.hpp"

namespace dfdm {

enum class ModelKind { svm_hinge, cnn_sigmoid };

inline const char* model_kind_name(ModelKind k) {
    return k == ModelKind::svm_hinge ? "svm_hinge" : "cnn_sigmoid";
}

inline ModelKind parse_model_kind(std::string_view s) {
    if (s == "svm_hinge") return ModelKind::svm_hinge;
    if (s == "cnn_sigmoid") return ModelKind::cnn_sigmoid;
    throw ConfigError("unknown model kind '" + std::string(s) +
                      "' (expected svm_hinge or cnn_sigmoid)");
}

struct ModelHyper {
    int kernel = 3;
    int filters = 32;
    int hidden = 128;
    double l2 = 0.01;
    double dropout = 0.2;
};

/// A classifier: an ordered layer stack plus the loss it was compiled with.
///
/// Output convention: the single head unit scores the "real" class. The
/// cnn_sigmoid head emits a probability in [0,1]; the svm_hinge head emits an
/// unbounded margin whose sign decides (>= 0 means real).
template <typename T>
struct Model {
    ModelKind kind = ModelKind::cnn_sigmoid;
    std::size_t in_h = 0, in_w = 0, in_c = 0;
    ModelHyper hyper;
    LossKind loss = LossKind::bce;
    std::vector<Layer<T>> layers;
    // Per-layer output shapes (without the batch axis), fixed at build time.
    std::vector<std::vector<std::size_t>> output_shapes;

    /// Eval-mode forward over a batch; returns one score/probability per item.
    Tensor<T> predict(const Tensor<T>& batch) const {
        Tensor<T> cur = check_batch(batch);
        for (const Layer<T>& layer : layers) {
            cur = std::visit(
                [&](const auto& l) -> Tensor<T> {
                    using L = std::decay_t<decltype(l)>;
                    if constexpr (std::is_same_v<L, Dropout<T>>) {
                        return l.forward(cur, /*train=*/false, nullptr);
                    } else {
                        return l.forward(cur);
                    }
                },
                layer);
        }
        return cur.reshaped({batch.extent(0)});
    }

    /// Train-mode forward, recording per-layer caches for backward. The rng
    /// drives dropout masks only.
    Tensor<T> forward_train(const Tensor<T>& batch, Rng& rng,
                            std::vector<LayerCache<T>>& caches) const {
        caches.assign(layers.size(), LayerCache<T>{});
        Tensor<T> cur = check_batch(batch);
        for (std::size_t i = 0; i < layers.size(); ++i) {
            cur = std::visit(
                [&](const auto& l) -> Tensor<T> {
                    using L = std::decay_t<decltype(l)>;
                    if constexpr (std::is_same_v<L, Conv2D<T>>) {
                        Conv2DCache<T> c;
                        Tensor<T> y = l.forward(cur, &c);
                        caches[i] = std::move(c);
                        return y;
                    } else if constexpr (std::is_same_v<L, MaxPool2D<T>>) {
                        MaxPoolCache<T> c;
                        Tensor<T> y = l.forward(cur, &c);
                        caches[i] = std::move(c);
                        return y;
                    } else if constexpr (std::is_same_v<L, Dropout<T>>) {
                        DropoutCache<T> c;
                        Tensor<T> y = l.forward(cur, /*train=*/true, &rng, &c);
                        caches[i] = std::move(c);
                        return y;
                    } else if constexpr (std::is_same_v<L, Flatten<T>>) {
                        FlattenCache<T> c;
                        Tensor<T> y = l.forward(cur, &c);
                        caches[i] = std::move(c);
                        return y;
                    } else {
                        DenseCache<T> c;
                        Tensor<T> y = l.forward(cur, &c);
                        caches[i] = std::move(c);
                        return y;
                    }
                },
                layers[i]);
        }
        return cur.reshaped({batch.extent(0)});
    }

    /// Reverse pass from dL/d(head output); leaves parameter gradients in the
    /// layers and returns dL/d(input batch).
    Tensor<T> backward(const std::vector<LayerCache<T>>& caches, const Tensor<T>& d_head) {
        Tensor<T> d = d_head.reshaped({d_head.size(), 1});
        for (std::size_t i = layers.size(); i-- > 0;) {
            d = std::visit(
                [&](auto& l) -> Tensor<T> {
                    using L = std::decay_t<decltype(l)>;
                    if constexpr (std::is_same_v<L, Conv2D<T>>) {
                        return l.backward(std::get<Conv2DCache<T>>(caches[i]), d);
                    } else if constexpr (std::is_same_v<L, MaxPool2D<T>>) {
                        return l.backward(std::get<MaxPoolCache<T>>(caches[i]), d);
                    } else if constexpr (std::is_same_v<L, Dropout<T>>) {
                        return l.backward(std::get<DropoutCache<T>>(caches[i]), d);
                    } else if constexpr (std::is_same_v<L, Flatten<T>>) {
                        return l.backward(std::get<FlattenCache<T>>(caches[i]), d);
                    } else {
                        return l.backward(std::get<DenseCache<T>>(caches[i]), d);
                    }
                },
                layers[i]);
        }
        return d;
    }

    std::vector<Tensor<T>*> params() {
        std::vector<Tensor<T>*> out;
        for (Layer<T>& layer : layers) {
            std::visit(
                [&](auto& l) {
                    using L = std::decay_t<decltype(l)>;
                    if constexpr (std::is_same_v<L, Conv2D<T>> || std::is_same_v<L, Dense<T>>) {
                        out.push_back(&l.weights);
                        out.push_back(&l.bias);
                    }
                },
                layer);
        }
        return out;
    }

    std::vector<const Tensor<T>*> params() const {
        std::vector<const Tensor<T>*> out;
        for (const Layer<T>& layer : layers) {
            std::visit(
                [&](const auto& l) {
                    using L = std::decay_t<decltype(l)>;
                    if constexpr (std::is_same_v<L, Conv2D<T>> || std::is_same_v<L, Dense<T>>) {
                        out.push_back(&l.weights);
                        out.push_back(&l.bias);
                    }
                },
                layer);
        }
        return out;
    }

    std::vector<const Tensor<T>*> grads() {
        std::vector<const Tensor<T>*> out;
        for (Layer<T>& layer : layers) {
            std::visit(
                [&](auto& l) {
                    using L = std::decay_t<decltype(l)>;
                    if constexpr (std::is_same_v<L, Conv2D<T>> || std::is_same_v<L, Dense<T>>) {
                        out.push_back(&l.dweights);
                        out.push_back(&l.dbias);
                    }
                },
                layer);
        }
        return out;
    }

    /// L2 penalty term added to the loss (svm_hinge head only by default).
    T l2_penalty() const {
        T acc = 0;
        for (const Layer<T>& layer : layers) {
            if (const Dense<T>* d = std::get_if<Dense<T>>(&layer)) acc += d->l2_penalty();
        }
        return acc;
    }

private:
    Tensor<T> check_batch(const Tensor<T>& batch) const {
        if (batch.rank() != 4 || batch.extent(1) != in_h || batch.extent(2) != in_w ||
            batch.extent(3) != in_c) {
            throw ShapeError("model: batch " + shape_str(batch.shape()) +
                             " does not match input " +
                             shape_str({in_h, in_w, in_c}));
        }
        return batch;
    }
};

/// Builds one of the two architectures with seeded Glorot-uniform weights and
/// zero biases, validating the whole shape chain before any allocation.
template <typename T>
Model<T> build_model(ModelKind kind, std::size_t h, std::size_t w, std::size_t c,
                     const ModelHyper& hyper, std::uint64_t seed) {
    if (h < 8 || w < 8) {
        throw ShapeError("build_model: input " + shape_str({h, w, c}) +
                         " is smaller than the 8x8 minimum");
    }
    if (c != 1 && c != 3) {
        throw ShapeError("build_model: input channels must be 1 or 3, got " +
                         std::to_string(c));
    }

    Model<T> m;
    m.kind = kind;
    m.in_h = h;
    m.in_w = w;
    m.in_c = c;
    m.hyper = hyper;
    m.loss = kind == ModelKind::svm_hinge ? LossKind::hinge : LossKind::bce;

    auto conv = [&] {
        Conv2D<T> l;
        l.filters = hyper.filters;
        l.kernel = hyper.kernel;
        l.stride = 2;
        l.act = Activation::relu;
        return l;
    };
    if (kind == ModelKind::svm_hinge) {
        m.layers.emplace_back(conv());
        m.layers.emplace_back(MaxPool2D<T>{});
        m.layers.emplace_back(conv());
        m.layers.emplace_back(MaxPool2D<T>{});
        m.layers.emplace_back(Flatten<T>{});
        Dense<T> head;
        head.units = 1;
        head.act = Activation::identity;
        head.l2 = hyper.l2;
        m.layers.emplace_back(std::move(head));
    } else {
        m.layers.emplace_back(conv());
        m.layers.emplace_back(conv());
        m.layers.emplace_back(MaxPool2D<T>{});
        m.layers.emplace_back(Dropout<T>(hyper.dropout));
        m.layers.emplace_back(Flatten<T>{});
        Dense<T> hidden;
        hidden.units = hyper.hidden;
        hidden.act = Activation::relu;
        m.layers.emplace_back(std::move(hidden));
        m.layers.emplace_back(Dropout<T>(hyper.dropout));
        Dense<T> head;
        head.units = 1;
        head.act = Activation::sigmoid;
        m.layers.emplace_back(std::move(head));
    }

    // Walk the shape chain first so a bad configuration fails before init.
    std::size_t ch = h, cw = w, cc = c;
    bool flat = false;
    std::size_t width = 0;
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        std::visit(
            [&](auto& l) {
                using L = std::decay_t<decltype(l)>;
                const std::string where =
                    "layer " + std::to_string(i) + " (" + layer_name(m.layers[i]) + ")";
                if constexpr (std::is_same_v<L, Conv2D<T>>) {
                    ch = same_pad(ch, l.kernel, l.stride).out;
                    cw = same_pad(cw, l.kernel, l.stride).out;
                    cc = static_cast<std::size_t>(l.filters);
                    m.output_shapes.push_back({ch, cw, cc});
                } else if constexpr (std::is_same_v<L, MaxPool2D<T>>) {
                    if (ch < 2 || cw < 2) {
                        throw ShapeError("build_model: " + where + " input " +
                                         shape_str({ch, cw, cc}) +
                                         " underflows the 2x2 pooling window");
                    }
                    ch /= 2;
                    cw /= 2;
                    m.output_shapes.push_back({ch, cw, cc});
                } else if constexpr (std::is_same_v<L, Flatten<T>>) {
                    flat = true;
                    width = ch * cw * cc;
                    m.output_shapes.push_back({width});
                } else if constexpr (std::is_same_v<L, Dense<T>>) {
                    width = static_cast<std::size_t>(l.units);
                    m.output_shapes.push_back({width});
                } else {
                    m.output_shapes.push_back(flat ? std::vector<std::size_t>{width}
                                                   : std::vector<std::size_t>{ch, cw, cc});
                }
            },
            m.layers[i]);
    }

    Rng init_rng = Rng(seed).split("init");
    std::size_t cin = c;
    std::size_t flat_width = 0;
    for (std::size_t i = 0; i < m.layers.size(); ++i) {
        std::visit(
            [&](auto& l) {
                using L = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<L, Conv2D<T>>) {
                    l.init_params(cin, init_rng);
                    cin = static_cast<std::size_t>(l.filters);
                } else if constexpr (std::is_same_v<L, Flatten<T>>) {
                    flat_width = m.output_shapes[i][0];
                } else if constexpr (std::is_same_v<L, Dense<T>>) {
                    l.init_params(flat_width, init_rng);
                    flat_width = static_cast<std::size_t>(l.units);
                }
            },
            m.layers[i]);
    }
    return m;
}

/// Decision rule shared by both heads: real iff probability >= threshold
/// (cnn_sigmoid) or margin >= 0 (svm_hinge).
template <typename T>
std::vector<Label> classify_outputs(const Model<T>& m, const Tensor<T>& outputs,
                                    double threshold = 0.5) {
    std::vector<Label> labels(outputs.size());
    for (std::size_t i = 0; i < outputs.size(); ++i) {
        const double cut = m.kind == ModelKind::cnn_sigmoid ? threshold : 0.0;
        labels[i] = outputs[i] >= T(cut) ? Label::real : Label::deepfake;
    }
    return labels;
}

template <typename T>
std::vector<Label> classify(const Model<T>& m, const Tensor<T>& batch, double threshold = 0.5) {
    return classify_outputs(m, m.predict(batch), threshold);
}

/// Loss-boundary label encoding: hinge sees real as +1 and deepfake as -1,
/// bce sees real as 1 and deepfake as 0.
template <typename T>
Tensor<T> loss_targets(LossKind loss, const std::vector<Label>& labels) {
    Tensor<T> t({labels.size()});
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (loss == LossKind::hinge) {
            t[i] = labels[i] == Label::real ? T(1) : T(-1);
        } else {
            t[i] = labels[i] == Label::real ? T(1) : T(0);
        }
    }
    return t;
}

template <typename T>
LossResult<T> model_loss(LossKind loss, const Tensor<T>& outputs, const Tensor<T>& targets) {
    return loss == LossKind::hinge ? hinge_loss(outputs, targets) : bce_loss(outputs, targets);
}

/// Full training objective (data loss + L2 penalty) for a fixed dropout
/// stream. Taking the rng by value makes repeated calls replay identical
/// masks, which is what finite-difference checking needs.
template <typename T>
T model_objective(const Model<T>& m, const Tensor<T>& batch, const Tensor<T>& targets,
                  Rng dropout_rng, bool train_mode) {
    T out_loss;
    if (train_mode) {
        std::vector<LayerCache<T>> caches;
        const Tensor<T> outputs = m.forward_train(batch, dropout_rng, caches);
        out_loss = model_loss(m.loss, outputs, targets).loss;
    } else {
        out_loss = model_loss(m.loss, m.predict(batch), targets).loss;
    }
    return out_loss + m.l2_penalty();
}

/// Forward + backward over one batch; gradients are left in the layers.
/// Returns the total objective (data loss + L2 penalty).
template <typename T>
T model_step(Model<T>& m, const Tensor<T>& batch, const Tensor<T>& targets, Rng dropout_rng) {
    std::vector<LayerCache<T>> caches;
    const Tensor<T> outputs = m.forward_train(batch, dropout_rng, caches);
    LossResult<T> lr = model_loss(m.loss, outputs, targets);
    m.backward(caches, lr.grad);
    return lr.loss + m.l2_penalty();
}

}  // namespace dfdm

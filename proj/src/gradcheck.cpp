#include "dfdm/gradcheck.hpp"

#include <cmath>
#include <functional>

#include "dfdm/errors.hpp"
#include "dfdm/model.hpp"

namespace dfdm {

namespace {

constexpr double kStep = 1e-5;
constexpr double kKinkClearance = 1e-3;

double rel_err(double analytic, double numeric) {
    const double denom = std::max(std::abs(analytic), std::abs(numeric));
    if (denom < 1e-10) return 0.0;
    return std::abs(analytic - numeric) / denom;
}

/// Central differences of `loss` w.r.t. every element of every tensor in
/// `subjects`, compared against the matching analytic gradients.
double fd_max_rel_err(const std::vector<Tensor<double>*>& subjects,
                      std::vector<Tensor<double>> analytic,
                      const std::function<double()>& loss, bool inject_error) {
    if (inject_error && !analytic.empty() && analytic[0].size() > 0) {
        analytic[0][0] = analytic[0][0] * 1.02 + 1e-3;
    }
    double worst = 0.0;
    for (std::size_t t = 0; t < subjects.size(); ++t) {
        Tensor<double>& subject = *subjects[t];
        for (std::size_t i = 0; i < subject.size(); ++i) {
            const double saved = subject[i];
            subject[i] = saved + kStep;
            const double lp = loss();
            subject[i] = saved - kStep;
            const double lm = loss();
            subject[i] = saved;
            const double numeric = (lp - lm) / (2.0 * kStep);
            worst = std::max(worst, rel_err(analytic[t][i], numeric));
        }
    }
    return worst;
}

/// Scalar probe loss sum(y * r): its gradient w.r.t. y is exactly r, so the
/// layer backward can be driven with a known upstream gradient.
double probe_loss(const Tensor<double>& y, const Tensor<double>& r) {
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) acc += y[i] * r[i];
    return acc;
}

bool clear_of_kinks(const Tensor<double>& preact) {
    for (std::size_t i = 0; i < preact.size(); ++i) {
        if (std::abs(preact[i]) < kKinkClearance) return false;
    }
    return true;
}

// Top-two gap in every 2x2 pooling window must clear the FD step by a margin,
// otherwise the argmax can flip under perturbation. An all-zero window (every
// value relu-clamped, preactivations safely negative) is gradient-dead on
// both sides of the perturbation and therefore safe despite the tie.
bool pool_windows_distinct(const Tensor<double>& x) {
    const std::size_t n = x.extent(0), h = x.extent(1), w = x.extent(2), c = x.extent(3);
    for (std::size_t ni = 0; ni < n; ++ni)
        for (std::size_t oy = 0; oy + 1 < h; oy += 2)
            for (std::size_t ox = 0; ox + 1 < w; ox += 2)
                for (std::size_t ci = 0; ci < c; ++ci) {
                    double best = -1e300, second = -1e300;
                    for (std::size_t dy = 0; dy < 2; ++dy)
                        for (std::size_t dx = 0; dx < 2; ++dx) {
                            const double v = x(ni, oy + dy, ox + dx, ci);
                            if (v > best) {
                                second = best;
                                best = v;
                            } else if (v > second) {
                                second = v;
                            }
                        }
                    if (best == 0.0) continue;
                    if (best - second < kKinkClearance) return false;
                }
    return true;
}

struct CheckContext {
    Rng instance_rng;
    bool inject_error;
};

using CheckFn = double (*)(CheckContext&);

double check_conv2d(CheckContext& ctx) {
    for (std::size_t attempt = 0;; ++attempt) {
        if (attempt >= 100) throw NumericError("conv2d gradcheck: no kink-free instance found");
        Rng rng = ctx.instance_rng.split(attempt);
        Conv2D<double> conv;
        conv.filters = 3;
        conv.kernel = 3;
        conv.stride = 2;
        conv.act = Activation::relu;
        conv.init_params(2, rng);
        Tensor<double> x = rng_uniform<double>(rng, {2, 5, 6, 2}, -1.0, 1.0);

        Conv2DCache<double> cache;
        Tensor<double> y = conv.forward(x, &cache);
        if (!clear_of_kinks(cache.preact)) continue;

        const Tensor<double> r = rng_uniform<double>(rng, y.shape(), -1.0, 1.0);
        Tensor<double> dx = conv.backward(cache, r);

        auto loss = [&] { return probe_loss(conv.forward(x), r); };
        return fd_max_rel_err({&x, &conv.weights, &conv.bias},
                              {dx, conv.dweights, conv.dbias}, loss, ctx.inject_error);
    }
}

double check_maxpool(CheckContext& ctx) {
    for (std::size_t attempt = 0;; ++attempt) {
        if (attempt >= 100) throw NumericError("maxpool gradcheck: no tie-free instance found");
        Rng rng = ctx.instance_rng.split(attempt);
        Tensor<double> x = rng_uniform<double>(rng, {1, 4, 4, 2}, 0.0, 1.0);
        if (!pool_windows_distinct(x)) continue;

        MaxPool2D<double> pool;
        MaxPoolCache<double> cache;
        Tensor<double> y = pool.forward(x, &cache);
        const Tensor<double> r = rng_uniform<double>(rng, y.shape(), -1.0, 1.0);
        Tensor<double> dx = pool.backward(cache, r);

        auto loss = [&] { return probe_loss(pool.forward(x), r); };
        return fd_max_rel_err({&x}, {dx}, loss, ctx.inject_error);
    }
}

double check_dropout(CheckContext& ctx) {
    Rng rng = ctx.instance_rng.split(std::uint64_t{0});
    Tensor<double> x = rng_uniform<double>(rng, {2, 10}, -1.0, 1.0);
    const Rng mask_rng = rng.split("mask");

    Dropout<double> drop(0.2);
    DropoutCache<double> cache;
    {
        Rng r = mask_rng;
        drop.forward(x, true, &r, &cache);
    }
    Tensor<double> probe = rng_uniform<double>(rng, x.shape(), -1.0, 1.0);
    Tensor<double> dx = drop.backward(cache, probe);

    auto loss = [&] {
        Rng r = mask_rng;
        return probe_loss(drop.forward(x, true, &r), probe);
    };
    return fd_max_rel_err({&x}, {dx}, loss, ctx.inject_error);
}

double check_dense(CheckContext& ctx) {
    for (std::size_t attempt = 0;; ++attempt) {
        if (attempt >= 100) throw NumericError("dense gradcheck: no kink-free instance found");
        Rng rng = ctx.instance_rng.split(attempt);
        Dense<double> dense;
        dense.units = 2;
        dense.l2 = 0.01;
        switch (ctx.instance_rng.seed() % 3) {
            case 0: dense.act = Activation::identity; break;
            case 1: dense.act = Activation::relu; break;
            default: dense.act = Activation::sigmoid; break;
        }
        dense.init_params(4, rng);
        Tensor<double> x = rng_uniform<double>(rng, {3, 4}, -1.0, 1.0);

        DenseCache<double> cache;
        Tensor<double> y = dense.forward(x, &cache);
        if (dense.act == Activation::relu && !clear_of_kinks(cache.preact)) continue;

        const Tensor<double> r = rng_uniform<double>(rng, y.shape(), -1.0, 1.0);
        Tensor<double> dx = dense.backward(cache, r);

        auto loss = [&] { return probe_loss(dense.forward(x), r) + dense.l2_penalty(); };
        return fd_max_rel_err({&x, &dense.weights, &dense.bias},
                              {dx, dense.dweights, dense.dbias}, loss, ctx.inject_error);
    }
}

double check_flatten(CheckContext& ctx) {
    Rng rng = ctx.instance_rng.split(std::uint64_t{0});
    Tensor<double> x = rng_uniform<double>(rng, {2, 3, 2, 2}, -1.0, 1.0);
    Flatten<double> flat;
    FlattenCache<double> cache;
    Tensor<double> y = flat.forward(x, &cache);
    const Tensor<double> r = rng_uniform<double>(rng, y.shape(), -1.0, 1.0);
    Tensor<double> dx = flat.backward(cache, r);

    auto loss = [&] { return probe_loss(flat.forward(x), r); };
    return fd_max_rel_err({&x}, {dx}, loss, ctx.inject_error);
}

double check_hinge(CheckContext& ctx) {
    for (std::size_t attempt = 0;; ++attempt) {
        if (attempt >= 100) throw NumericError("hinge gradcheck: no kink-free instance found");
        Rng rng = ctx.instance_rng.split(attempt);
        Tensor<double> scores = rng_uniform<double>(rng, {8}, -2.0, 2.0);
        Tensor<double> targets({8});
        for (std::size_t i = 0; i < 8; ++i) targets[i] = rng.next_double() < 0.5 ? 1.0 : -1.0;

        bool clean = true;
        for (std::size_t i = 0; i < 8; ++i) {
            if (std::abs(1.0 - targets[i] * scores[i]) < kKinkClearance) clean = false;
        }
        if (!clean) continue;

        LossResult<double> res = hinge_loss(scores, targets);
        auto loss = [&] { return hinge_loss(scores, targets).loss; };
        return fd_max_rel_err({&scores}, {res.grad}, loss, ctx.inject_error);
    }
}

double check_bce(CheckContext& ctx) {
    Rng rng = ctx.instance_rng.split(std::uint64_t{0});
    Tensor<double> probs = rng_uniform<double>(rng, {8}, 0.05, 0.95);
    Tensor<double> targets({8});
    for (std::size_t i = 0; i < 8; ++i) targets[i] = rng.next_double() < 0.5 ? 1.0 : 0.0;

    LossResult<double> res = bce_loss(probs, targets);
    auto loss = [&] { return bce_loss(probs, targets).loss; };
    return fd_max_rel_err({&probs}, {res.grad}, loss, ctx.inject_error);
}

/// Walks the model layer by layer with the given dropout stream and reports
/// whether any relu preactivation, pooling window or hinge margin sits within
/// the kink clearance.
bool model_instance_clean(const Model<double>& m, const Tensor<double>& x,
                          const Tensor<double>& targets, Rng dropout_rng) {
    Tensor<double> cur = x;
    for (const Layer<double>& layer : m.layers) {
        bool ok = true;
        cur = std::visit(
            [&](const auto& l) -> Tensor<double> {
                using L = std::decay_t<decltype(l)>;
                if constexpr (std::is_same_v<L, Conv2D<double>>) {
                    Conv2DCache<double> cache;
                    Tensor<double> y = l.forward(cur, &cache);
                    ok = clear_of_kinks(cache.preact);
                    return y;
                } else if constexpr (std::is_same_v<L, MaxPool2D<double>>) {
                    ok = pool_windows_distinct(cur);
                    return l.forward(cur);
                } else if constexpr (std::is_same_v<L, Dropout<double>>) {
                    return l.forward(cur, true, &dropout_rng);
                } else if constexpr (std::is_same_v<L, Flatten<double>>) {
                    return l.forward(cur);
                } else {
                    DenseCache<double> cache;
                    Tensor<double> y = l.forward(cur, &cache);
                    if (l.act == Activation::relu) ok = clear_of_kinks(cache.preact);
                    return y;
                }
            },
            layer);
        if (!ok) return false;
    }
    if (m.loss == LossKind::hinge) {
        const Tensor<double> out = cur.reshaped({x.extent(0)});
        for (std::size_t i = 0; i < out.size(); ++i) {
            if (std::abs(1.0 - targets[i] * out[i]) < kKinkClearance) return false;
        }
    }
    return true;
}

double check_model(CheckContext& ctx, ModelKind kind) {
    ModelHyper hyper;
    hyper.kernel = 3;
    hyper.filters = 4;
    hyper.hidden = 8;
    hyper.l2 = 0.01;
    hyper.dropout = 0.2;

    for (std::size_t attempt = 0;; ++attempt) {
        if (attempt >= 100) throw NumericError("model gradcheck: no kink-free instance found");
        Rng rng = ctx.instance_rng.split(attempt);
        Model<double> m = build_model<double>(kind, 16, 16, 3, hyper, rng.next_u64());
        Tensor<double> x = rng_uniform<double>(rng, {2, 16, 16, 3}, 0.0, 1.0);
        const std::vector<Label> labels = {Label::real, Label::deepfake};
        const Tensor<double> targets = loss_targets<double>(m.loss, labels);
        const Rng dropout_rng = rng.split("dropout");

        if (!model_instance_clean(m, x, targets, dropout_rng)) continue;

        model_step(m, x, targets, dropout_rng);
        std::vector<Tensor<double>> analytic;
        for (const Tensor<double>* g : m.grads()) analytic.push_back(*g);

        auto loss = [&] { return model_objective(m, x, targets, dropout_rng, true); };
        return fd_max_rel_err(m.params(), std::move(analytic), loss, ctx.inject_error);
    }
}

double check_model_svm(CheckContext& ctx) { return check_model(ctx, ModelKind::svm_hinge); }
double check_model_cnn(CheckContext& ctx) { return check_model(ctx, ModelKind::cnn_sigmoid); }

struct CheckSpec {
    const char* name;
    CheckFn fn;
    double threshold;
};

const CheckSpec kChecks[] = {
    {"conv2d", check_conv2d, 1e-5},
    {"maxpool", check_maxpool, 1e-5},
    {"dropout", check_dropout, 1e-5},
    {"dense", check_dense, 1e-5},
    {"flatten", check_flatten, 1e-5},
    {"hinge", check_hinge, 1e-5},
    {"bce", check_bce, 1e-5},
    {"model_svm", check_model_svm, 1e-4},
    {"model_cnn", check_model_cnn, 1e-4},
};

}  // namespace

const std::vector<std::string>& gradcheck_names() {
    static const std::vector<std::string> names = [] {
        std::vector<std::string> v;
        for (const CheckSpec& c : kChecks) v.push_back(c.name);
        return v;
    }();
    return names;
}

std::vector<GradCheckResult> run_gradcheck(const std::string& which,
                                           const GradCheckOptions& options) {
    bool matched = which == "all";
    for (const CheckSpec& c : kChecks) matched = matched || which == c.name;
    if (!matched) throw ConfigError("unknown gradcheck layer '" + which + "'");

    std::vector<GradCheckResult> results;
    for (const CheckSpec& c : kChecks) {
        if (which != "all" && which != c.name) continue;
        GradCheckResult r;
        r.name = c.name;
        r.threshold = c.threshold;
        r.trials = options.trials;
        for (std::size_t t = 0; t < options.trials; ++t) {
            CheckContext ctx{Rng(options.seed).split(c.name).split(t), options.inject_error};
            r.max_rel_err = std::max(r.max_rel_err, c.fn(ctx));
        }
        results.push_back(std::move(r));
    }
    return results;
}

}  // namespace dfdm

#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <variant>
#include <vector>

#include "dfdm/tensor.hpp"

namespace dfdm {

enum class Activation { identity, relu, sigmoid };

template <typename T>
T stable_sigmoid(T x) {
    if (x >= T(0)) {
        const T e = std::exp(-x);
        return T(1) / (T(1) + e);
    }
    const T e = std::exp(x);
    return e / (T(1) + e);
}

template <typename T>
T apply_activation(Activation act, T pre) {
    switch (act) {
        case Activation::relu: return pre > T(0) ? pre : T(0);
        case Activation::sigmoid: return stable_sigmoid(pre);
        default: return pre;
    }
}

template <typename T>
T activation_grad(Activation act, T pre) {
    switch (act) {
        case Activation::relu: return pre > T(0) ? T(1) : T(0);
        case Activation::sigmoid: {
            const T s = stable_sigmoid(pre);
            return s * (T(1) - s);
        }
        default: return T(1);
    }
}

/// "Same" padding layout for one axis: output extent is ceil(in/stride) and
/// any odd padding puts the extra zero row/column on the trailing edge.
struct PadSpec {
    std::size_t out;
    std::size_t before;
    std::size_t after;
};

inline PadSpec same_pad(std::size_t in, std::size_t kernel, std::size_t stride) {
    const std::size_t out = (in + stride - 1) / stride;
    const std::size_t needed = (out - 1) * stride + kernel;
    const std::size_t total = needed > in ? needed - in : 0;
    return {out, total / 2, total - total / 2};
}

enum class ConvPath { im2col, direct };

template <typename T>
struct Conv2DCache {
    Tensor<T> padded;   // zero-padded input, NHWC
    Tensor<T> preact;   // pre-activation output, NHWC
    std::size_t in_h = 0, in_w = 0;
};

/// 2-D convolution, NHWC, "same" padding, weights [k,k,Cin,Cout].
/// The im2col path lowers to matmul; the direct path is the slow reference.
/// Both accumulate in identical order (kh, kw, ci; f-group sums in backward),
/// so they agree bit-for-bit in f64.
template <typename T>
struct Conv2D {
    int filters = 32;
    int kernel = 3;
    int stride = 2;
    Activation act = Activation::relu;
    ConvPath path = ConvPath::im2col;

    Tensor<T> weights;  // [k,k,Cin,filters]
    Tensor<T> bias;     // [filters]
    Tensor<T> dweights;
    Tensor<T> dbias;

    void init_params(std::size_t cin, Rng& rng) {
        const std::size_t k = static_cast<std::size_t>(kernel);
        const std::size_t f = static_cast<std::size_t>(filters);
        const double fan_in = static_cast<double>(k * k * cin);
        const double fan_out = static_cast<double>(k * k * f);
        const double limit = std::sqrt(6.0 / (fan_in + fan_out));
        weights = rng_uniform<T>(rng, {k, k, cin, f}, -limit, limit);
        bias = Tensor<T>({f});
        dweights = Tensor<T>(weights.shape());
        dbias = Tensor<T>(bias.shape());
    }

    std::size_t in_channels() const { return weights.extent(2); }

    Tensor<T> forward(const Tensor<T>& x, Conv2DCache<T>* cache = nullptr) const {
        check_input(x);
        const std::size_t n = x.extent(0), h = x.extent(1), w = x.extent(2), c = x.extent(3);
        const std::size_t k = static_cast<std::size_t>(kernel);
        const std::size_t s = static_cast<std::size_t>(stride);
        const std::size_t f = static_cast<std::size_t>(filters);
        const PadSpec ph = same_pad(h, k, s), pw = same_pad(w, k, s);

        Tensor<T> padded({n, h + ph.before + ph.after, w + pw.before + pw.after, c});
        for (std::size_t ni = 0; ni < n; ++ni)
            for (std::size_t y = 0; y < h; ++y)
                for (std::size_t xx = 0; xx < w; ++xx)
                    for (std::size_t ci = 0; ci < c; ++ci)
                        padded(ni, y + ph.before, xx + pw.before, ci) = x(ni, y, xx, ci);

        Tensor<T> preact({n, ph.out, pw.out, f});
        if (path == ConvPath::im2col) {
            const Tensor<T> cols = im2col(padded, n, ph.out, pw.out, k, s, c);
            const Tensor<T> wmat = weights.reshaped({k * k * c, f});
            Tensor<T> pre_mat = matmul(cols, wmat);
            for (std::size_t r = 0; r < pre_mat.extent(0); ++r)
                for (std::size_t fi = 0; fi < f; ++fi) pre_mat[r * f + fi] += bias[fi];
            preact = pre_mat.reshaped({n, ph.out, pw.out, f});
        } else {
            for (std::size_t ni = 0; ni < n; ++ni)
                for (std::size_t oy = 0; oy < ph.out; ++oy)
                    for (std::size_t ox = 0; ox < pw.out; ++ox)
                        for (std::size_t fi = 0; fi < f; ++fi) {
                            T acc = 0;
                            for (std::size_t kh = 0; kh < k; ++kh)
                                for (std::size_t kw = 0; kw < k; ++kw)
                                    for (std::size_t ci = 0; ci < c; ++ci)
                                        acc += padded(ni, oy * s + kh, ox * s + kw, ci) *
                                               weights(kh, kw, ci, fi);
                            preact(ni, oy, ox, fi) = acc + bias[fi];
                        }
        }

        Tensor<T> out(preact.shape());
        for (std::size_t i = 0; i < preact.size(); ++i)
            out[i] = apply_activation(act, preact[i]);
        if (cache) {
            cache->padded = std::move(padded);
            cache->preact = std::move(preact);
            cache->in_h = h;
            cache->in_w = w;
        }
        return out;
    }

    /// Fills dweights/dbias, returns dL/dx.
    Tensor<T> backward(const Conv2DCache<T>& cache, const Tensor<T>& dy) {
        if (dy.shape() != cache.preact.shape()) {
            throw ShapeError("conv2d backward: upstream gradient " + shape_str(dy.shape()) +
                             " does not match forward output " + shape_str(cache.preact.shape()));
        }
        const std::size_t n = cache.preact.extent(0), ho = cache.preact.extent(1),
                          wo = cache.preact.extent(2), f = cache.preact.extent(3);
        const std::size_t k = static_cast<std::size_t>(kernel);
        const std::size_t s = static_cast<std::size_t>(stride);
        const std::size_t c = in_channels();
        const PadSpec ph = same_pad(cache.in_h, k, s), pw = same_pad(cache.in_w, k, s);

        Tensor<T> dpre(dy.shape());
        for (std::size_t i = 0; i < dy.size(); ++i)
            dpre[i] = dy[i] * activation_grad(act, cache.preact[i]);

        dbias = Tensor<T>({f});
        const std::size_t rows = n * ho * wo;
        for (std::size_t r = 0; r < rows; ++r)
            for (std::size_t fi = 0; fi < f; ++fi) dbias[fi] += dpre[r * f + fi];

        Tensor<T> dpadded(cache.padded.shape());
        const Tensor<T> dpre_mat = dpre.reshaped({rows, f});
        if (path == ConvPath::im2col) {
            const Tensor<T> cols = im2col(cache.padded, n, ho, wo, k, s, c);
            dweights = matmul_tn(cols, dpre_mat).reshaped({k, k, c, f});
            const Tensor<T> wmat = weights.reshaped({k * k * c, f});
            const Tensor<T> dcols = matmul_nt(dpre_mat, wmat);
            // col2im: scatter-add in (row, column) order
            std::size_t r = 0;
            for (std::size_t ni = 0; ni < n; ++ni)
                for (std::size_t oy = 0; oy < ho; ++oy)
                    for (std::size_t ox = 0; ox < wo; ++ox, ++r) {
                        std::size_t q = 0;
                        for (std::size_t kh = 0; kh < k; ++kh)
                            for (std::size_t kw = 0; kw < k; ++kw)
                                for (std::size_t ci = 0; ci < c; ++ci, ++q)
                                    dpadded(ni, oy * s + kh, ox * s + kw, ci) +=
                                        dcols[r * (k * k * c) + q];
                    }
        } else {
            dweights = Tensor<T>({k, k, c, f});
            std::size_t r = 0;
            for (std::size_t ni = 0; ni < n; ++ni)
                for (std::size_t oy = 0; oy < ho; ++oy)
                    for (std::size_t ox = 0; ox < wo; ++ox, ++r)
                        for (std::size_t kh = 0; kh < k; ++kh)
                            for (std::size_t kw = 0; kw < k; ++kw)
                                for (std::size_t ci = 0; ci < c; ++ci) {
                                    const T xv = cache.padded(ni, oy * s + kh, ox * s + kw, ci);
                                    T acc = 0;
                                    for (std::size_t fi = 0; fi < f; ++fi) {
                                        dweights(kh, kw, ci, fi) += xv * dpre_mat[r * f + fi];
                                        acc += dpre_mat[r * f + fi] * weights(kh, kw, ci, fi);
                                    }
                                    dpadded(ni, oy * s + kh, ox * s + kw, ci) += acc;
                                }
        }

        Tensor<T> dx({n, cache.in_h, cache.in_w, c});
        for (std::size_t ni = 0; ni < n; ++ni)
            for (std::size_t y = 0; y < cache.in_h; ++y)
                for (std::size_t xx = 0; xx < cache.in_w; ++xx)
                    for (std::size_t ci = 0; ci < c; ++ci)
                        dx(ni, y, xx, ci) = dpadded(ni, y + ph.before, xx + pw.before, ci);
        return dx;
    }

private:
    void check_input(const Tensor<T>& x) const {
        if (x.rank() != 4) {
            throw ShapeError("conv2d: expected NHWC input, got " + shape_str(x.shape()));
        }
        if (x.extent(3) != in_channels()) {
            throw ShapeError("conv2d: input channels " + shape_str(x.shape()) +
                             " do not match weights " + shape_str(weights.shape()));
        }
    }

    // Rows are (n, oy, ox); columns are (kh, kw, ci). This ordering matches
    // the direct path's loop nest, which is what makes the two paths agree
    // exactly in f64.
    static Tensor<T> im2col(const Tensor<T>& padded, std::size_t n, std::size_t ho,
                            std::size_t wo, std::size_t k, std::size_t s, std::size_t c) {
        Tensor<T> cols({n * ho * wo, k * k * c});
        std::size_t r = 0;
        for (std::size_t ni = 0; ni < n; ++ni)
            for (std::size_t oy = 0; oy < ho; ++oy)
                for (std::size_t ox = 0; ox < wo; ++ox, ++r) {
                    std::size_t q = 0;
                    for (std::size_t kh = 0; kh < k; ++kh)
                        for (std::size_t kw = 0; kw < k; ++kw)
                            for (std::size_t ci = 0; ci < c; ++ci, ++q)
                                cols[r * (k * k * c) + q] = padded(ni, oy * s + kh, ox * s + kw, ci);
                }
        return cols;
    }
};

template <typename T>
struct MaxPoolCache {
    std::vector<std::size_t> in_shape;
    std::vector<std::size_t> out_shape;
    std::vector<std::size_t> argmax;  // flat input index of each window winner
};

/// 2x2 max pooling with stride 2 over disjoint windows. Ties go to the first
/// element in row-major window order; odd trailing rows/columns are dropped.
template <typename T>
struct MaxPool2D {
    static constexpr std::size_t window = 2;

    Tensor<T> forward(const Tensor<T>& x, MaxPoolCache<T>* cache = nullptr) const {
        if (x.rank() != 4) {
            throw ShapeError("maxpool: expected NHWC input, got " + shape_str(x.shape()));
        }
        const std::size_t n = x.extent(0), h = x.extent(1), w = x.extent(2), c = x.extent(3);
        if (h < window || w < window) {
            throw ShapeError("maxpool: spatial extents of " + shape_str(x.shape()) +
                             " are smaller than the 2x2 window");
        }
        const std::size_t ho = h / 2, wo = w / 2;
        Tensor<T> y({n, ho, wo, c});
        std::vector<std::size_t> argmax(y.size());
        std::size_t o = 0;
        for (std::size_t ni = 0; ni < n; ++ni)
            for (std::size_t oy = 0; oy < ho; ++oy)
                for (std::size_t ox = 0; ox < wo; ++ox)
                    for (std::size_t ci = 0; ci < c; ++ci, ++o) {
                        std::size_t best = ((ni * h + oy * 2) * w + ox * 2) * c + ci;
                        T best_v = x[best];
                        for (std::size_t dy = 0; dy < 2; ++dy)
                            for (std::size_t dx = 0; dx < 2; ++dx) {
                                const std::size_t idx =
                                    ((ni * h + oy * 2 + dy) * w + ox * 2 + dx) * c + ci;
                                if (x[idx] > best_v) {
                                    best_v = x[idx];
                                    best = idx;
                                }
                            }
                        y[o] = best_v;
                        argmax[o] = best;
                    }
        if (cache) {
            cache->in_shape = x.shape();
            cache->out_shape = y.shape();
            cache->argmax = std::move(argmax);
        }
        return y;
    }

    Tensor<T> backward(const MaxPoolCache<T>& cache, const Tensor<T>& dy) const {
        if (dy.shape() != cache.out_shape) {
            throw ShapeError("maxpool backward: upstream gradient " + shape_str(dy.shape()) +
                             " does not match pooled output " + shape_str(cache.out_shape));
        }
        Tensor<T> dx(cache.in_shape);
        for (std::size_t o = 0; o < dy.size(); ++o) dx[cache.argmax[o]] += dy[o];
        return dx;
    }
};

template <typename T>
struct DropoutCache {
    Tensor<T> mask;  // 0 or 1/(1-rate) per unit
    bool identity = true;
};

/// Inverted dropout: train mode zeroes units with probability `rate` and
/// scales survivors by 1/(1-rate); eval mode is the identity.
template <typename T>
struct Dropout {
    double rate = 0.2;

    explicit Dropout(double r = 0.2) : rate(r) {
        if (!(r >= 0.0 && r < 1.0)) {
            throw ShapeError("dropout: rate " + std::to_string(r) + " outside [0,1)");
        }
    }

    Tensor<T> forward(const Tensor<T>& x, bool train, Rng* rng,
                      DropoutCache<T>* cache = nullptr) const {
        if (!train || rate == 0.0) {
            if (cache) cache->identity = true;
            return x;
        }
        const T keep_scale = T(1.0 / (1.0 - rate));
        Tensor<T> mask(x.shape());
        for (std::size_t i = 0; i < mask.size(); ++i)
            mask[i] = rng->next_double() < rate ? T(0) : keep_scale;
        Tensor<T> y = mul(x, mask);
        if (cache) {
            cache->identity = false;
            cache->mask = std::move(mask);
        }
        return y;
    }

    Tensor<T> backward(const DropoutCache<T>& cache, const Tensor<T>& dy) const {
        if (cache.identity) return dy;
        return mul(dy, cache.mask);
    }
};

template <typename T>
struct FlattenCache {
    std::vector<std::size_t> in_shape;
};

/// Collapses every axis after the batch axis, preserving element order.
template <typename T>
struct Flatten {
    Tensor<T> forward(const Tensor<T>& x, FlattenCache<T>* cache = nullptr) const {
        if (x.rank() < 2) {
            throw ShapeError("flatten: expected batched input, got " + shape_str(x.shape()));
        }
        if (cache) cache->in_shape = x.shape();
        return x.reshaped({x.extent(0), x.size() / x.extent(0)});
    }

    Tensor<T> backward(const FlattenCache<T>& cache, const Tensor<T>& dy) const {
        return dy.reshaped(cache.in_shape);
    }
};

template <typename T>
struct DenseCache {
    Tensor<T> input;   // (N, in)
    Tensor<T> preact;  // (N, units)
};

/// Fully connected layer: y = act(x W + b), with an optional L2 weight
/// penalty whose gradient (2 * l2 * W) is folded into backward. The penalty
/// applies to weights only, never the bias.
template <typename T>
struct Dense {
    int units = 1;
    Activation act = Activation::identity;
    double l2 = 0.0;

    Tensor<T> weights;  // [in, units]
    Tensor<T> bias;     // [units]
    Tensor<T> dweights;
    Tensor<T> dbias;

    void init_params(std::size_t in, Rng& rng) {
        const std::size_t u = static_cast<std::size_t>(units);
        const double limit = std::sqrt(6.0 / (static_cast<double>(in) + static_cast<double>(u)));
        weights = rng_uniform<T>(rng, {in, u}, -limit, limit);
        bias = Tensor<T>({u});
        dweights = Tensor<T>(weights.shape());
        dbias = Tensor<T>(bias.shape());
    }

    std::size_t in_width() const { return weights.extent(0); }

    Tensor<T> forward(const Tensor<T>& x, DenseCache<T>* cache = nullptr) const {
        if (x.rank() != 2 || x.extent(1) != in_width()) {
            throw ShapeError("dense: input " + shape_str(x.shape()) +
                             " does not match weights " + shape_str(weights.shape()));
        }
        const std::size_t n = x.extent(0);
        const std::size_t u = static_cast<std::size_t>(units);
        Tensor<T> pre = matmul(x, weights);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < u; ++j) pre[i * u + j] += bias[j];
        Tensor<T> y(pre.shape());
        for (std::size_t i = 0; i < pre.size(); ++i) y[i] = apply_activation(act, pre[i]);
        if (cache) {
            cache->input = x;
            cache->preact = std::move(pre);
        }
        return y;
    }

    T l2_penalty() const {
        if (l2 == 0.0) return T(0);
        T acc = 0;
        for (std::size_t i = 0; i < weights.size(); ++i) acc += weights[i] * weights[i];
        return T(l2) * acc;
    }

    Tensor<T> backward(const DenseCache<T>& cache, const Tensor<T>& dy) {
        if (dy.shape() != cache.preact.shape()) {
            throw ShapeError("dense backward: upstream gradient " + shape_str(dy.shape()) +
                             " does not match output " + shape_str(cache.preact.shape()));
        }
        Tensor<T> dpre(dy.shape());
        for (std::size_t i = 0; i < dy.size(); ++i)
            dpre[i] = dy[i] * activation_grad(act, cache.preact[i]);

        dweights = matmul_tn(cache.input, dpre);
        if (l2 != 0.0) {
            for (std::size_t i = 0; i < dweights.size(); ++i)
                dweights[i] += T(2.0 * l2) * weights[i];
        }
        const std::size_t n = dpre.extent(0);
        const std::size_t u = static_cast<std::size_t>(units);
        dbias = Tensor<T>({u});
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < u; ++j) dbias[j] += dpre[i * u + j];
        return matmul_nt(dpre, weights);
    }
};

template <typename T>
using Layer = std::variant<Conv2D<T>, MaxPool2D<T>, Dropout<T>, Flatten<T>, Dense<T>>;

template <typename T>
using LayerCache = std::variant<std::monostate, Conv2DCache<T>, MaxPoolCache<T>,
                                DropoutCache<T>, FlattenCache<T>, DenseCache<T>>;

template <typename T>
const char* layer_name(const Layer<T>& layer) {
    struct Namer {
        const char* operator()(const Conv2D<T>&) const { return "conv2d"; }
        const char* operator()(const MaxPool2D<T>&) const { return "maxpool"; }
        const char* operator()(const Dropout<T>&) const { return "dropout"; }
        const char* operator()(const Flatten<T>&) const { return "flatten"; }
        const char* operator()(const Dense<T>&) const { return "dense"; }
    };
    return std::visit(Namer{}, layer);
}

}  // namespace dfdm

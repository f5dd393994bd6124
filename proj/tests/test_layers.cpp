#include <doctest.h>

#include <cmath>
#include <functional>

#include "dfdm/layers.hpp"

using namespace dfdm;

namespace {

// Independent conv oracle: explicit zero-padded sliding window, no im2col.
template <typename T>
Tensor<T> conv_oracle(const Tensor<T>& x, const Tensor<T>& weights, const Tensor<T>& bias,
                      int stride, Activation act) {
    const std::size_t n = x.extent(0), h = x.extent(1), w = x.extent(2), c = x.extent(3);
    const std::size_t k = weights.extent(0), f = weights.extent(3);
    const std::size_t s = static_cast<std::size_t>(stride);
    const PadSpec ph = same_pad(h, k, s), pw = same_pad(w, k, s);
    Tensor<T> y({n, ph.out, pw.out, f});
    for (std::size_t ni = 0; ni < n; ++ni)
        for (std::size_t oy = 0; oy < ph.out; ++oy)
            for (std::size_t ox = 0; ox < pw.out; ++ox)
                for (std::size_t fi = 0; fi < f; ++fi) {
                    T acc = bias[fi];
                    for (std::size_t kh = 0; kh < k; ++kh)
                        for (std::size_t kw = 0; kw < k; ++kw)
                            for (std::size_t ci = 0; ci < c; ++ci) {
                                const std::ptrdiff_t iy =
                                    static_cast<std::ptrdiff_t>(oy * s + kh) -
                                    static_cast<std::ptrdiff_t>(ph.before);
                                const std::ptrdiff_t ix =
                                    static_cast<std::ptrdiff_t>(ox * s + kw) -
                                    static_cast<std::ptrdiff_t>(pw.before);
                                if (iy < 0 || ix < 0 || iy >= static_cast<std::ptrdiff_t>(h) ||
                                    ix >= static_cast<std::ptrdiff_t>(w)) {
                                    continue;
                                }
                                acc += x(ni, static_cast<std::size_t>(iy),
                                         static_cast<std::size_t>(ix), ci) *
                                       weights(kh, kw, ci, fi);
                            }
                    y(ni, oy, ox, fi) = apply_activation(act, acc);
                }
    return y;
}

double max_rel_diff(const Tensor<double>& a, const Tensor<double>& b) {
    REQUIRE(a.shape() == b.shape());
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double denom = std::max(std::abs(a[i]), std::abs(b[i]));
        if (denom < 1e-12) continue;
        worst = std::max(worst, std::abs(a[i] - b[i]) / denom);
    }
    return worst;
}

// Central finite differences of `loss` w.r.t. every element of `subject`.
Tensor<double> fd_grad(Tensor<double>& subject, const std::function<double()>& loss,
                       double step = 1e-5) {
    Tensor<double> grad(subject.shape());
    for (std::size_t i = 0; i < subject.size(); ++i) {
        const double saved = subject[i];
        subject[i] = saved + step;
        const double lp = loss();
        subject[i] = saved - step;
        const double lm = loss();
        subject[i] = saved;
        grad[i] = (lp - lm) / (2.0 * step);
    }
    return grad;
}

double probe(const Tensor<double>& y, const Tensor<double>& r) {
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) acc += y[i] * r[i];
    return acc;
}

Conv2D<double> make_conv(int filters, int kernel, std::size_t cin, Activation act,
                         std::uint64_t seed) {
    Conv2D<double> conv;
    conv.filters = filters;
    conv.kernel = kernel;
    conv.stride = 2;
    conv.act = act;
    Rng rng(seed);
    conv.init_params(cin, rng);
    return conv;
}

}  // namespace

TEST_CASE("same padding law: out = ceil(in/2) for extents 1..17") {
    for (std::size_t in = 1; in <= 17; ++in) {
        const PadSpec p = same_pad(in, 3, 2);
        CHECK(p.out == (in + 1) / 2);
        // trailing edge takes the extra zero when padding is odd
        CHECK(p.after >= p.before);
        CHECK(p.after - p.before <= 1);
    }
}

TEST_CASE("conv on 1x1 input with zero weights emits the bias") {
    Conv2D<double> conv = make_conv(1, 3, 1, Activation::identity, 1);
    conv.weights = Tensor<double>(conv.weights.shape());  // zeros
    conv.bias = Tensor<double>({1}, {5.0});
    const Tensor<double> x({1, 1, 1, 1}, {3.25});
    const Tensor<double> y = conv.forward(x);
    CHECK(y.shape() == std::vector<std::size_t>{1, 1, 1, 1});
    CHECK(y[0] == 5.0);
}

TEST_CASE("conv output extent is 32 for a 64x64 stride-2 input") {
    Conv2D<float> conv;
    conv.filters = 32;
    conv.kernel = 3;
    conv.stride = 2;
    conv.act = Activation::relu;
    Rng rng(2);
    conv.init_params(3, rng);
    const Tensor<float> x = rng_uniform<float>(rng, {1, 64, 64, 3}, 0.0, 1.0);
    CHECK(conv.forward(x).shape() == std::vector<std::size_t>{1, 32, 32, 32});
}

TEST_CASE("conv forward matches the sliding-window oracle on both paths") {
    Rng rng(5);
    Conv2D<double> conv = make_conv(3, 3, 2, Activation::relu, 6);
    const Tensor<double> x = rng_uniform<double>(rng, {1, 6, 6, 2}, -1.0, 1.0);
    const Tensor<double> expected = conv_oracle(x, conv.weights, conv.bias, 2, conv.act);

    conv.path = ConvPath::im2col;
    CHECK(max_rel_diff(conv.forward(x), expected) < 1e-12);
    conv.path = ConvPath::direct;
    CHECK(max_rel_diff(conv.forward(x), expected) < 1e-12);
}

TEST_CASE("im2col and direct conv agree bit-exactly in f64, 1e-6 in f32") {
    Rng rng(8);
    for (int trial = 0; trial < 5; ++trial) {
        Conv2D<double> conv = make_conv(4, 3, 3, Activation::relu, 100 + trial);
        const Tensor<double> x =
            rng_uniform<double>(rng, {2, 5 + static_cast<std::size_t>(trial), 7, 3}, -1.0, 1.0);
        conv.path = ConvPath::im2col;
        Conv2DCache<double> cache_a;
        const Tensor<double> ya = conv.forward(x, &cache_a);
        conv.path = ConvPath::direct;
        Conv2DCache<double> cache_b;
        const Tensor<double> yb = conv.forward(x, &cache_b);
        CHECK(ya == yb);

        // backward agreement, given the same upstream gradient
        const Tensor<double> dy = rng_uniform<double>(rng, ya.shape(), -1.0, 1.0);
        conv.path = ConvPath::im2col;
        const Tensor<double> dxa = conv.backward(cache_a, dy);
        const Tensor<double> dwa = conv.dweights, dba = conv.dbias;
        conv.path = ConvPath::direct;
        const Tensor<double> dxb = conv.backward(cache_b, dy);
        CHECK(dxa == dxb);
        CHECK(dwa == conv.dweights);
        CHECK(dba == conv.dbias);

        // f32 crossing of the two paths
        Conv2D<float> convf;
        convf.filters = conv.filters;
        convf.kernel = conv.kernel;
        convf.stride = conv.stride;
        convf.act = conv.act;
        convf.weights = conv.weights.cast<float>();
        convf.bias = conv.bias.cast<float>();
        const Tensor<float> xf = x.cast<float>();
        convf.path = ConvPath::im2col;
        const Tensor<float> fa = convf.forward(xf);
        convf.path = ConvPath::direct;
        const Tensor<float> fb = convf.forward(xf);
        for (std::size_t i = 0; i < fa.size(); ++i) {
            const float denom = std::max({std::abs(fa[i]), std::abs(fb[i]), 1e-6f});
            CHECK(std::abs(fa[i] - fb[i]) / denom <= 1e-6f);
        }
    }
}

TEST_CASE("conv backward matches finite differences (f64, 1x5x5x1, k=3)") {
    Rng rng(21);
    Conv2D<double> conv = make_conv(2, 3, 1, Activation::identity, 22);
    Tensor<double> x = rng_uniform<double>(rng, {1, 5, 5, 1}, -1.0, 1.0);
    Conv2DCache<double> cache;
    const Tensor<double> y = conv.forward(x, &cache);
    const Tensor<double> r = rng_uniform<double>(rng, y.shape(), -1.0, 1.0);
    const Tensor<double> dx = conv.backward(cache, r);

    auto loss = [&] { return probe(conv.forward(x), r); };
    CHECK(max_rel_diff(dx, fd_grad(x, loss)) < 1e-5);
    CHECK(max_rel_diff(conv.dweights, fd_grad(conv.weights, loss)) < 1e-5);
    CHECK(max_rel_diff(conv.dbias, fd_grad(conv.bias, loss)) < 1e-5);
}

TEST_CASE("conv backward with zero upstream gradient yields zero gradients") {
    Rng rng(31);
    Conv2D<double> conv = make_conv(2, 3, 2, Activation::relu, 32);
    const Tensor<double> x = rng_uniform<double>(rng, {1, 4, 4, 2}, -1.0, 1.0);
    Conv2DCache<double> cache;
    const Tensor<double> y = conv.forward(x, &cache);
    const Tensor<double> dx = conv.backward(cache, Tensor<double>(y.shape()));
    CHECK(dx == Tensor<double>(x.shape()));
    CHECK(conv.dweights == Tensor<double>(conv.weights.shape()));
    CHECK(conv.dbias == Tensor<double>(conv.bias.shape()));
}

TEST_CASE("conv bias gradient equals the direct preactivation-gradient sum") {
    // identity activation makes d(pre) == upstream dy
    Rng rng(41);
    Conv2D<double> conv = make_conv(3, 3, 2, Activation::identity, 42);
    const Tensor<double> x = rng_uniform<double>(rng, {2, 6, 5, 2}, -1.0, 1.0);
    Conv2DCache<double> cache;
    const Tensor<double> y = conv.forward(x, &cache);
    const Tensor<double> dy = rng_uniform<double>(rng, y.shape(), -1.0, 1.0);
    conv.backward(cache, dy);

    const std::size_t f = y.extent(3);
    Tensor<double> expected({f});
    for (std::size_t n = 0; n < y.extent(0); ++n)
        for (std::size_t oy = 0; oy < y.extent(1); ++oy)
            for (std::size_t ox = 0; ox < y.extent(2); ++ox)
                for (std::size_t fi = 0; fi < f; ++fi) expected[fi] += dy(n, oy, ox, fi);
    CHECK(max_rel_diff(conv.dbias, expected) < 1e-12);
}

TEST_CASE("conv rejects channel mismatch") {
    Conv2D<double> conv = make_conv(2, 3, 3, Activation::relu, 50);
    const Tensor<double> x({1, 8, 8, 2});
    CHECK_THROWS_AS(conv.forward(x), ShapeError);
}

TEST_CASE("conv backward rejects a stale upstream gradient shape") {
    Rng rng(51);
    Conv2D<double> conv = make_conv(2, 3, 1, Activation::relu, 52);
    const Tensor<double> x = rng_uniform<double>(rng, {1, 6, 6, 1}, 0.0, 1.0);
    Conv2DCache<double> cache;
    conv.forward(x, &cache);
    CHECK_THROWS_AS(conv.backward(cache, Tensor<double>({1, 4, 4, 2})), ShapeError);
}

TEST_CASE("maxpool basics") {
    MaxPool2D<double> pool;
    const Tensor<double> x({1, 2, 2, 1}, {1, 2, 3, 4});
    MaxPoolCache<double> cache;
    const Tensor<double> y = pool.forward(x, &cache);
    CHECK(y.size() == 1);
    CHECK(y[0] == 4.0);
    CHECK(cache.argmax[0] == 3);
}

TEST_CASE("maxpool tie-break picks the first window element") {
    MaxPool2D<double> pool;
    const Tensor<double> x = Tensor<double>::full({1, 4, 4, 1}, 2.5);
    MaxPoolCache<double> cache;
    const Tensor<double> y = pool.forward(x, &cache);
    CHECK(y == Tensor<double>::full({1, 2, 2, 1}, 2.5));
    CHECK(cache.argmax[0] == 0);
    CHECK(cache.argmax[1] == 2);
    CHECK(cache.argmax[2] == 8);
    CHECK(cache.argmax[3] == 10);
}

TEST_CASE("maxpool equals the brute-force windowwise max") {
    Rng rng(61);
    const Tensor<double> x = rng_uniform<double>(rng, {2, 8, 8, 3}, -1.0, 1.0);
    MaxPool2D<double> pool;
    const Tensor<double> y = pool.forward(x);
    for (std::size_t n = 0; n < 2; ++n)
        for (std::size_t oy = 0; oy < 4; ++oy)
            for (std::size_t ox = 0; ox < 4; ++ox)
                for (std::size_t c = 0; c < 3; ++c) {
                    double best = -1e300;
                    for (std::size_t dy = 0; dy < 2; ++dy)
                        for (std::size_t dx = 0; dx < 2; ++dx)
                            best = std::max(best, x(n, oy * 2 + dy, ox * 2 + dx, c));
                    CHECK(y(n, oy, ox, c) == best);
                }
}

TEST_CASE("maxpool rejects inputs smaller than the window") {
    MaxPool2D<double> pool;
    CHECK_THROWS_AS(pool.forward(Tensor<double>({1, 1, 4, 1})), ShapeError);
    CHECK_THROWS_AS(pool.forward(Tensor<double>({1, 4, 1, 1})), ShapeError);
}

TEST_CASE("maxpool backward matches finite differences on distinct values") {
    Rng rng(71);
    MaxPool2D<double> pool;
    Tensor<double> x({1, 4, 4, 1});
    for (std::size_t i = 0; i < x.size(); ++i)
        x[i] = static_cast<double>(i) * 0.37 + rng.uniform(0.0, 0.1);
    MaxPoolCache<double> cache;
    const Tensor<double> y = pool.forward(x, &cache);
    const Tensor<double> r = rng_uniform<double>(rng, y.shape(), -1.0, 1.0);
    const Tensor<double> dx = pool.backward(cache, r);
    auto loss = [&] { return probe(pool.forward(x), r); };
    CHECK(max_rel_diff(dx, fd_grad(x, loss)) < 1e-5);
}

TEST_CASE("maxpool backward routes exactly one unit per window and conserves mass") {
    Rng rng(81);
    MaxPool2D<double> pool;
    const Tensor<double> x = rng_uniform<double>(rng, {1, 6, 6, 2}, 0.0, 1.0);
    MaxPoolCache<double> cache;
    const Tensor<double> y = pool.forward(x, &cache);

    const Tensor<double> ones = Tensor<double>::full(y.shape(), 1.0);
    const Tensor<double> dx = pool.backward(cache, ones);
    std::size_t nonzero = 0;
    for (std::size_t i = 0; i < dx.size(); ++i) {
        CHECK((dx[i] == 0.0 || dx[i] == 1.0));
        nonzero += dx[i] == 1.0;
    }
    CHECK(nonzero == y.size());

    const Tensor<double> dy = rng_uniform<double>(rng, y.shape(), -1.0, 1.0);
    const Tensor<double> dx2 = pool.backward(cache, dy);
    double sum_dy = 0.0, sum_dx = 0.0;
    for (std::size_t i = 0; i < dy.size(); ++i) sum_dy += dy[i];
    for (std::size_t i = 0; i < dx2.size(); ++i) sum_dx += dx2[i];
    CHECK(sum_dx == doctest::Approx(sum_dy).epsilon(1e-12));
}

TEST_CASE("maxpool backward rejects a stale mask") {
    MaxPool2D<double> pool;
    Rng rng(91);
    const Tensor<double> x = rng_uniform<double>(rng, {1, 4, 4, 1}, 0.0, 1.0);
    MaxPoolCache<double> cache;
    pool.forward(x, &cache);
    CHECK_THROWS_AS(pool.backward(cache, Tensor<double>({1, 3, 3, 1})), ShapeError);
}

TEST_CASE("dropout eval mode is the identity") {
    Dropout<float> drop(0.2);
    Rng rng(101);
    const Tensor<float> x = rng_uniform<float>(rng, {4, 7}, -1.0, 1.0);
    CHECK(drop.forward(x, false, nullptr) == x);
}

TEST_CASE("dropout rate zero is the identity in train mode") {
    Dropout<float> drop(0.0);
    Rng rng(102);
    Rng mask_rng(103);
    const Tensor<float> x = rng_uniform<float>(rng, {4, 7}, -1.0, 1.0);
    CHECK(drop.forward(x, true, &mask_rng) == x);
}

TEST_CASE("inverted dropout keeps the expectation: mean within 1.0 +/- 0.005") {
    Dropout<double> drop(0.2);
    Rng rng(104);
    const Tensor<double> ones = Tensor<double>::full({1000000}, 1.0);
    const Tensor<double> y = drop.forward(ones, true, &rng);
    double sum = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) sum += y[i];
    CHECK(std::abs(sum / static_cast<double>(y.size()) - 1.0) < 0.005);
}

TEST_CASE("dropout rejects rates outside [0,1)") {
    CHECK_THROWS_AS(Dropout<float>(1.0), ShapeError);
    CHECK_THROWS_AS(Dropout<float>(-0.1), ShapeError);
}

TEST_CASE("dense identity with unit weights passes input through") {
    Dense<double> dense;
    dense.units = 3;
    Rng rng(111);
    dense.init_params(3, rng);
    dense.weights = Tensor<double>({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1});
    dense.bias = Tensor<double>({3});
    const Tensor<double> x = rng_uniform<double>(rng, {2, 3}, -1.0, 1.0);
    CHECK(dense.forward(x) == x);
}

TEST_CASE("sigmoid(0) is 0.5") {
    CHECK(apply_activation(Activation::sigmoid, 0.0) == 0.5);
    CHECK(stable_sigmoid(700.0) == doctest::Approx(1.0));
    CHECK(stable_sigmoid(-700.0) == doctest::Approx(0.0));
}

TEST_CASE("dense backward matches finite differences including the L2 term") {
    for (Activation act : {Activation::identity, Activation::relu, Activation::sigmoid}) {
        Dense<double> dense;
        dense.units = 2;
        dense.act = act;
        dense.l2 = 0.01;
        Rng rng(121 + static_cast<int>(act));
        dense.init_params(4, rng);
        Tensor<double> x = rng_uniform<double>(rng, {3, 4}, 0.1, 1.0);

        DenseCache<double> cache;
        const Tensor<double> y = dense.forward(x, &cache);
        const Tensor<double> r = rng_uniform<double>(rng, y.shape(), -1.0, 1.0);
        const Tensor<double> dx = dense.backward(cache, r);

        auto loss = [&] { return probe(dense.forward(x), r) + dense.l2_penalty(); };
        CHECK(max_rel_diff(dx, fd_grad(x, loss)) < 1e-5);
        CHECK(max_rel_diff(dense.dweights, fd_grad(dense.weights, loss)) < 1e-5);
        CHECK(max_rel_diff(dense.dbias, fd_grad(dense.bias, loss)) < 1e-5);
    }
}

TEST_CASE("dense rejects width mismatch") {
    Dense<double> dense;
    dense.units = 2;
    Rng rng(131);
    dense.init_params(4, rng);
    CHECK_THROWS_AS(dense.forward(Tensor<double>({3, 5})), ShapeError);
}

TEST_CASE("flatten preserves order and round-trips") {
    Tensor<double> x({2, 3, 3, 1});
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i);
    Flatten<double> flat;
    FlattenCache<double> cache;
    const Tensor<double> y = flat.forward(x, &cache);
    CHECK(y.shape() == std::vector<std::size_t>{2, 9});
    for (std::size_t i = 0; i < y.size(); ++i) CHECK(y[i] == static_cast<double>(i));
    CHECK(flat.backward(cache, y) == x);
}

TEST_CASE("flatten conserves element count for random shapes") {
    Rng rng(141);
    for (int trial = 0; trial < 10; ++trial) {
        const std::vector<std::size_t> shape = {1 + rng.below(4), 1 + rng.below(5),
                                                1 + rng.below(5), 1 + rng.below(3)};
        const Tensor<double> x = rng_uniform<double>(rng, shape, 0.0, 1.0);
        Flatten<double> flat;
        CHECK(flat.forward(x).size() == x.size());
    }
}

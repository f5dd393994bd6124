#pragma once

#include <cassert>
#include <cstddef>
#include <sstream>
#include <string>
#include <vector>

#include "dfdm/errors.hpp"
#include "dfdm/rng.hpp"

namespace dfdm {

inline std::string shape_str(const std::vector<std::size_t>& shape) {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

inline std::size_t shape_product(const std::vector<std::size_t>& shape) {
    std::size_t n = 1;
    for (std::size_t e : shape) n *= e;
    return n;
}

/// Dense n-dimensional array, row-major, contiguous. Images and feature maps
/// use NHWC order. All free functions below treat tensors as immutable
/// values: inputs are never modified.
template <typename T>
class Tensor {
public:
    Tensor() = default;

    explicit Tensor(std::vector<std::size_t> shape)
        : shape_(std::move(shape)), data_(checked_size(shape_), T(0)) {}

    Tensor(std::vector<std::size_t> shape, std::vector<T> data)
        : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != checked_size(shape_)) {
            throw ShapeError("tensor: " + std::to_string(data_.size()) +
                             " values do not fill shape " + shape_str(shape_));
        }
    }

    static Tensor full(std::vector<std::size_t> shape, T value) {
        Tensor t(std::move(shape));
        for (T& v : t.data_) v = value;
        return t;
    }

    const std::vector<std::size_t>& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }
    std::size_t extent(std::size_t axis) const { return shape_.at(axis); }

    T* data() { return data_.data(); }
    const T* data() const { return data_.data(); }
    std::vector<T>& values() { return data_; }
    const std::vector<T>& values() const { return data_; }

    T& operator[](std::size_t flat) { return data_[flat]; }
    const T& operator[](std::size_t flat) const { return data_[flat]; }

    template <typename... Is>
    T& operator()(Is... is) {
        return data_[offset(is...)];
    }
    template <typename... Is>
    const T& operator()(Is... is) const {
        return data_[offset(is...)];
    }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }

    /// Reshape preserving element order; element count must match.
    Tensor reshaped(std::vector<std::size_t> new_shape) const {
        if (shape_product(new_shape) != data_.size()) {
            throw ShapeError("reshape: " + shape_str(shape_) + " -> " +
                             shape_str(new_shape) + " changes element count");
        }
        return Tensor(std::move(new_shape), data_);
    }

    template <typename U>
    Tensor<U> cast() const {
        std::vector<U> out(data_.size());
        for (std::size_t i = 0; i < data_.size(); ++i) out[i] = static_cast<U>(data_[i]);
        return Tensor<U>(shape_, std::move(out));
    }

    friend bool operator==(const Tensor& a, const Tensor& b) {
        return a.shape_ == b.shape_ && a.data_ == b.data_;
    }

private:
    static std::size_t checked_size(const std::vector<std::size_t>& shape) {
        for (std::size_t e : shape) {
            if (e == 0) throw ShapeError("tensor: zero extent in shape " + shape_str(shape));
        }
        return shape_product(shape);
    }

    template <typename... Is>
    std::size_t offset(Is... is) const {
        assert(sizeof...(Is) == shape_.size());
        std::size_t idx[] = {static_cast<std::size_t>(is)...};
        std::size_t flat = 0;
        for (std::size_t k = 0; k < sizeof...(Is); ++k) {
            assert(idx[k] < shape_[k]);
            flat = flat * shape_[k] + idx[k];
        }
        return flat;
    }

    std::vector<std::size_t> shape_;
    std::vector<T> data_;
};

namespace detail {

template <typename T, typename F>
Tensor<T> zip(const Tensor<T>& a, const Tensor<T>& b, const char* op, F f) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                         " vs " + shape_str(b.shape()));
    }
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = f(a[i], b[i]);
    return out;
}

}  // namespace detail

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::zip(a, b, "add", [](T x, T y) { return x + y; });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::zip(a, b, "sub", [](T x, T y) { return x - y; });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::zip(a, b, "mul", [](T x, T y) { return x * y; });
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T s) {
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
    return out;
}

template <typename T>
Tensor<T> max_with_scalar(const Tensor<T>& a, T s) {
    Tensor<T> out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] > s ? a[i] : s;
    return out;
}

enum class MatmulKernel { blocked, naive };

/// C[M,N] = A[M,K] * B[K,N]. Both kernels accumulate each output element in
/// increasing-k order, so they are bit-identical to each other at any
/// precision; the blocked (ikj) kernel just streams B rows for cache reuse.
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b,
                 MatmulKernel kernel = MatmulKernel::blocked) {
    if (a.rank() != 2 || b.rank() != 2 || a.extent(1) != b.extent(0)) {
        throw ShapeError("matmul: incompatible shapes " + shape_str(a.shape()) +
                         " x " + shape_str(b.shape()));
    }
    const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
    Tensor<T> c({m, n});
    if (kernel == MatmulKernel::naive) {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t j = 0; j < n; ++j) {
                T acc = 0;
                for (std::size_t p = 0; p < k; ++p) acc += a[i * k + p] * b[p * n + j];
                c[i * n + j] = acc;
            }
    } else {
        for (std::size_t i = 0; i < m; ++i)
            for (std::size_t p = 0; p < k; ++p) {
                const T aip = a[i * k + p];
                const T* brow = b.data() + p * n;
                T* crow = c.data() + i * n;
                for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
            }
    }
    return c;
}

/// C[M,N] = A^T[M,K'] * B -- A is stored [K,M]. k accumulation order is the
/// row index of A, increasing.
template <typename T>
Tensor<T> matmul_tn(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.extent(0) != b.extent(0)) {
        throw ShapeError("matmul_tn: incompatible shapes " + shape_str(a.shape()) +
                         " x " + shape_str(b.shape()));
    }
    const std::size_t k = a.extent(0), m = a.extent(1), n = b.extent(1);
    Tensor<T> c({m, n});
    for (std::size_t p = 0; p < k; ++p) {
        const T* arow = a.data() + p * m;
        const T* brow = b.data() + p * n;
        for (std::size_t i = 0; i < m; ++i) {
            const T aip = arow[i];
            T* crow = c.data() + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
        }
    }
    return c;
}

/// C[M,N] = A[M,K] * B^T -- B is stored [N,K].
template <typename T>
Tensor<T> matmul_nt(const Tensor<T>& a, const Tensor<T>& b) {
    if (a.rank() != 2 || b.rank() != 2 || a.extent(1) != b.extent(1)) {
        throw ShapeError("matmul_nt: incompatible shapes " + shape_str(a.shape()) +
                         " x " + shape_str(b.shape()));
    }
    const std::size_t m = a.extent(0), k = a.extent(1), n = b.extent(0);
    Tensor<T> c({m, n});
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            const T* arow = a.data() + i * k;
            const T* brow = b.data() + j * k;
            T acc = 0;
            for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            c[i * n + j] = acc;
        }
    return c;
}

/// Deterministic tensor of uniform draws in [lo, hi), row-major fill order.
template <typename T>
Tensor<T> rng_uniform(Rng& rng, std::vector<std::size_t> shape, double lo, double hi) {
    if (!(lo < hi)) {
        throw ShapeError("rng_uniform: empty range [" + std::to_string(lo) + ", " +
                         std::to_string(hi) + ")");
    }
    Tensor<T> out(std::move(shape));
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = static_cast<T>(rng.uniform(lo, hi));
    return out;
}

}  // namespace dfdm

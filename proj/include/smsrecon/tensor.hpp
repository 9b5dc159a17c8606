#ifndef SMSRECON_TENSOR_HPP
#define SMSRECON_TENSOR_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "smsrecon/errors.hpp"

namespace smsrecon {

using cxd = std::complex<double>;

using Shape = std::vector<std::size_t>;

inline std::string shape_str(const Shape& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
    os << "]";
    return os.str();
}

/// Dense n-dimensional row-major array. T is double or std::complex<double>.
template <class T>
class Array {
public:
    Array() = default;

    explicit Array(Shape shape) : shape_(std::move(shape)) {
        data_.assign(count(shape_), T{});
    }

    Array(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != count(shape_))
            throw ShapeError("Array: data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_str(shape_));
    }

    static Array zeros(Shape shape) { return Array(std::move(shape)); }

    static Array ones(Shape shape) {
        Array a(std::move(shape));
        std::fill(a.data_.begin(), a.data_.end(), T{1});
        return a;
    }

    static Array full(Shape shape, T value) {
        Array a(std::move(shape));
        std::fill(a.data_.begin(), a.data_.end(), value);
        return a;
    }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t ndim() const noexcept { return shape_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
    std::size_t size() const noexcept { return data_.size(); }
    bool empty() const noexcept { return data_.empty(); }

    T* data() noexcept { return data_.data(); }
    const T* data() const noexcept { return data_.data(); }
    std::vector<T>& raw() noexcept { return data_; }
    const std::vector<T>& raw() const noexcept { return data_; }

    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    template <class... Ix>
    T& operator()(Ix... ix) {
        return data_[offset(ix...)];
    }
    template <class... Ix>
    const T& operator()(Ix... ix) const {
        return data_[offset(ix...)];
    }

    /// Rows (second-to-last axis) of the trailing 2-D planes.
    std::size_t rows() const { return shape_.at(ndim() - 2); }
    /// Columns (last axis).
    std::size_t cols() const { return shape_.back(); }
    /// Number of trailing 2-D planes (product of leading dims).
    std::size_t planes() const {
        if (ndim() < 2) throw ShapeError("Array: need >= 2 dims, got shape " + shape_str(shape_));
        std::size_t p = 1;
        for (std::size_t i = 0; i + 2 < ndim(); ++i) p *= shape_[i];
        return p;
    }

    /// Contiguous view of a sub-array along the first axis.
    Array slice(std::size_t i) const {
        if (ndim() < 1 || i >= shape_[0])
            throw ArgumentError("Array::slice: index " + std::to_string(i) + " out of range");
        Shape sub(shape_.begin() + 1, shape_.end());
        std::size_t n = count(sub);
        return Array(std::move(sub), std::vector<T>(data_.begin() + i * n, data_.begin() + (i + 1) * n));
    }

    void set_slice(std::size_t i, const Array& v) {
        std::size_t n = v.size();
        if (ndim() < 1 || i >= shape_[0] || n * shape_[0] != data_.size())
            throw ShapeError("Array::set_slice: incompatible shapes");
        std::copy(v.data(), v.data() + n, data_.begin() + i * n);
    }

    bool same_shape(const Array& o) const { return shape_ == o.shape_; }

    static std::size_t count(const Shape& s) {
        std::size_t n = 1;
        for (auto d : s) {
            if (d == 0) throw ShapeError("Array: zero-sized dimension in shape " + shape_str(s));
            n *= d;
        }
        return n;
    }

private:
    template <class... Ix>
    std::size_t offset(Ix... ix) const {
        constexpr std::size_t nd = sizeof...(Ix);
        const std::size_t idx[nd] = {static_cast<std::size_t>(ix)...};
        std::size_t off = 0;
        for (std::size_t a = 0; a < nd; ++a) off = off * shape_[a] + idx[a];
        return off;
    }

    Shape shape_;
    std::vector<T> data_;
};

using ComplexArray = Array<cxd>;
using RealArray = Array<double>;

template <class T>
inline void check_same_shape(const Array<T>& a, const Array<T>& b, const char* op) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) + " vs " +
                         shape_str(b.shape()));
}

template <class T>
inline Array<T> add(const Array<T>& a, const Array<T>& b) {
    check_same_shape(a, b, "add");
    Array<T> out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

template <class T>
inline Array<T> sub(const Array<T>& a, const Array<T>& b) {
    check_same_shape(a, b, "sub");
    Array<T> out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] -= b[i];
    return out;
}

template <class T>
inline Array<T> hadamard(const Array<T>& a, const Array<T>& b) {
    check_same_shape(a, b, "hadamard");
    Array<T> out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
    return out;
}

template <class T, class S>
inline Array<T> scale(const Array<T>& a, S factor) {
    Array<T> out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= factor;
    return out;
}

inline ComplexArray conj(const ComplexArray& a) {
    ComplexArray out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::conj(out[i]);
    return out;
}

/// l2 norm of the flattened array.
template <class T>
inline double norm2(const Array<T>& a) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::norm(cxd(a[i]));
    return std::sqrt(s);
}

template <class T>
inline bool all_finite(const Array<T>& a) {
    for (std::size_t i = 0; i < a.size(); ++i) {
        cxd v(a[i]);
        if (!std::isfinite(v.real()) || !std::isfinite(v.imag())) return false;
    }
    return true;
}

inline cxd vdot(const ComplexArray& a, const ComplexArray& b) {
    check_same_shape(a, b, "vdot");
    cxd s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += std::conj(a[i]) * b[i];
    return s;
}

inline RealArray abs(const ComplexArray& a) {
    RealArray out(a.shape());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = std::abs(a[i]);
    return out;
}

/// Multiply each trailing [ny, nx] plane of a by the 2-D mask m.
template <class T>
inline Array<T> hadamard_last2(const Array<T>& a, const RealArray& m) {
    if (a.ndim() < 2 || m.ndim() != 2 || a.rows() != m.dim(0) || a.cols() != m.dim(1))
        throw ShapeError("hadamard_last2: mask " + shape_str(m.shape()) + " does not match trailing dims of " +
                         shape_str(a.shape()));
    Array<T> out = a;
    const std::size_t plane = m.size();
    for (std::size_t p = 0; p < a.size() / plane; ++p)
        for (std::size_t i = 0; i < plane; ++i) out[p * plane + i] *= m[i];
    return out;
}

namespace detail {

/// i reduced into [0, n) with cyclic wrapping of negatives.
inline std::size_t wrap_index(long i, std::size_t n) {
    const long m = static_cast<long>(n);
    long r = i % m;
    if (r < 0) r += m;
    return static_cast<std::size_t>(r);
}

} // namespace detail

/// Cyclic shift of the trailing two axes by (dr, dc); positive shifts move content to higher indices.
template <class T>
inline Array<T> roll2(const Array<T>& a, long dr, long dc) {
    if (a.ndim() < 2) throw ShapeError("roll2: need >= 2 dims");
    const long ny = static_cast<long>(a.rows()), nx = static_cast<long>(a.cols());
    Array<T> out(a.shape());
    const std::size_t plane = static_cast<std::size_t>(ny * nx);
    dr = ((dr % ny) + ny) % ny;
    dc = ((dc % nx) + nx) % nx;
    for (std::size_t p = 0; p < a.size() / plane; ++p) {
        const T* src = a.data() + p * plane;
        T* dst = out.data() + p * plane;
        for (long r = 0; r < ny; ++r) {
            long rs = (r - dr + ny) % ny;
            for (long c = 0; c < nx; ++c) dst[r * nx + c] = src[rs * nx + ((c - dc + nx) % nx)];
        }
    }
    return out;
}

} // namespace smsrecon

#endif

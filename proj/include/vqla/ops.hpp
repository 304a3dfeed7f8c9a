#pragma once

// Elementwise, matmul, shape, normalization and loss operations on Tensor,
// each registering its backward rule on the active GradGraph.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "vqla/tensor.hpp"

namespace vqla {

namespace detail {

template <typename T>
bool recording(const Tensor<T>& a) {
    return GradGraph<T>::active() != nullptr && a.requires_grad();
}

template <typename T>
bool recording(const Tensor<T>& a, const Tensor<T>& b) {
    return GradGraph<T>::active() != nullptr && (a.requires_grad() || b.requires_grad());
}

inline bool is_suffix(const Shape& small, const Shape& big) {
    if (small.size() > big.size()) return false;
    const std::size_t off = big.size() - small.size();
    for (std::size_t i = 0; i < small.size(); ++i) {
        if (small[i] != big[i + off]) return false;
    }
    return true;
}

// Broadcast layout for a binary elementwise op: equal shapes, or the smaller
// shape a suffix of the larger (broadcast along leading axes).
enum class Bcast { none, b_small, a_small };

inline Bcast broadcast_mode(const Shape& a, const Shape& b, const char* op) {
    if (a == b) return Bcast::none;
    if (is_suffix(b, a)) return Bcast::b_small;
    if (is_suffix(a, b)) return Bcast::a_small;
    throw std::invalid_argument(std::string(op) + ": shapes " + shape_str(a) + " and " + shape_str(b) +
                                " are not broadcast-compatible");
}

template <typename T>
void debug_check_finite(const Tensor<T>& t, const char* op) {
#ifndef NDEBUG
    for (T v : t.data()) {
        if (!std::isfinite(static_cast<double>(v))) {
            throw std::runtime_error(std::string(op) + ": non-finite value in result");
        }
    }
#else
    (void)t;
    (void)op;
#endif
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Binary elementwise ops with leading-axis broadcasting.
// ---------------------------------------------------------------------------

namespace detail {

// fwd(x, y) -> value; dx(x, y) and dy(x, y) -> local partials.
template <typename T, typename F, typename Dx, typename Dy>
Tensor<T> binary_op(const Tensor<T>& a, const Tensor<T>& b, const char* name, F fwd, Dx dxf, Dy dyf) {
    const Bcast mode = broadcast_mode(a.shape(), b.shape(), name);
    const Tensor<T>& big = (mode == Bcast::a_small) ? b : a;
    Tensor<T> out(big.shape());
    const std::size_t n = out.size();
    const std::size_t na = a.size();
    const std::size_t nb = b.size();
    const T* pa = a.data().data();
    const T* pb = b.data().data();
    T* po = out.data().data();
    if (mode == Bcast::none) {
        for (std::size_t i = 0; i < n; ++i) po[i] = fwd(pa[i], pb[i]);
    } else if (mode == Bcast::b_small) {
        for (std::size_t base = 0; base < n; base += nb) {
            for (std::size_t i = 0; i < nb; ++i) po[base + i] = fwd(pa[base + i], pb[i]);
        }
    } else {
        for (std::size_t base = 0; base < n; base += na) {
            for (std::size_t i = 0; i < na; ++i) po[base + i] = fwd(pa[i], pb[base + i]);
        }
    }
    if (detail::recording(a, b)) {
        out.set_requires_grad(true);
        GradGraph<T>::active()->record([ai = a.ptr(), bi = b.ptr(), oi = out.ptr(), dxf, dyf]() {
            if (oi->grad.empty()) return;
            const std::size_t n2 = oi->data.size();
            const std::size_t na2 = ai->data.size();
            const std::size_t nb2 = bi->data.size();
            if (ai->requires_grad) {
                if (ai->grad.empty()) ai->grad.assign(na2, T(0));
                if (na2 == n2 && nb2 == n2) {
                    for (std::size_t i = 0; i < n2; ++i) ai->grad[i] += oi->grad[i] * dxf(ai->data[i], bi->data[i]);
                } else {
                    for (std::size_t i = 0; i < n2; ++i) {
                        ai->grad[i % na2] += oi->grad[i] * dxf(ai->data[i % na2], bi->data[i % nb2]);
                    }
                }
            }
            if (bi->requires_grad) {
                if (bi->grad.empty()) bi->grad.assign(nb2, T(0));
                if (na2 == n2 && nb2 == n2) {
                    for (std::size_t i = 0; i < n2; ++i) bi->grad[i] += oi->grad[i] * dyf(ai->data[i], bi->data[i]);
                } else {
                    for (std::size_t i = 0; i < n2; ++i) {
                        bi->grad[i % nb2] += oi->grad[i] * dyf(ai->data[i % na2], bi->data[i % nb2]);
                    }
                }
            }
        });
    }
    return out;
}

template <typename T, typename F, typename D>
Tensor<T> unary_op(const Tensor<T>& a, const char* name, F fwd, D dfn) {
    Tensor<T> out(a.shape());
    const std::size_t n = out.size();
    for (std::size_t i = 0; i < n; ++i) out.at(i) = fwd(a.at(i));
    debug_check_finite(out, name);
    if (detail::recording(a)) {
        out.set_requires_grad(true);
        GradGraph<T>::active()->record([ai = a.ptr(), oi = out.ptr(), dfn]() {
            if (oi->grad.empty() || !ai->requires_grad) return;
            if (ai->grad.empty()) ai->grad.assign(ai->data.size(), T(0));
            for (std::size_t i = 0; i < oi->data.size(); ++i) {
                ai->grad[i] += oi->grad[i] * dfn(ai->data[i], oi->data[i]);
            }
        });
    }
    return out;
}

}  // namespace detail

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary_op(
        a, b, "add", [](T x, T y) { return x + y; }, [](T, T) { return T(1); }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary_op(
        a, b, "sub", [](T x, T y) { return x - y; }, [](T, T) { return T(1); }, [](T, T) { return T(-1); });
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary_op(
        a, b, "mul", [](T x, T y) { return x * y; }, [](T, T y) { return y; }, [](T x, T) { return x; });
}

template <typename T>
Tensor<T> div(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary_op(
        a, b, "div", [](T x, T y) { return x / y; }, [](T, T y) { return T(1) / y; },
        [](T x, T y) { return -x / (y * y); });
}

// Ties send the gradient to the first argument.
template <typename T>
Tensor<T> maximum(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary_op(
        a, b, "maximum", [](T x, T y) { return x >= y ? x : y; }, [](T x, T y) { return x >= y ? T(1) : T(0); },
        [](T x, T y) { return x >= y ? T(0) : T(1); });
}

template <typename T>
Tensor<T> minimum(const Tensor<T>& a, const Tensor<T>& b) {
    return detail::binary_op(
        a, b, "minimum", [](T x, T y) { return x <= y ? x : y; }, [](T x, T y) { return x <= y ? T(1) : T(0); },
        [](T x, T y) { return x <= y ? T(0) : T(1); });
}

// ---------------------------------------------------------------------------
// Unary elementwise ops.
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> neg(const Tensor<T>& a) {
    return detail::unary_op(
        a, "neg", [](T x) { return -x; }, [](T, T) { return T(-1); });
}

template <typename T>
Tensor<T> relu(const Tensor<T>& a) {
    return detail::unary_op(
        a, "relu", [](T x) { return x > T(0) ? x : T(0); }, [](T x, T) { return x > T(0) ? T(1) : T(0); });
}

template <typename T>
Tensor<T> tanh(const Tensor<T>& a) {
    return detail::unary_op(
        a, "tanh", [](T x) { return std::tanh(x); }, [](T, T y) { return T(1) - y * y; });
}

template <typename T>
Tensor<T> sigmoid(const Tensor<T>& a) {
    return detail::unary_op(
        a, "sigmoid",
        [](T x) {
            // Split on sign so exp never overflows.
            if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
            const T e = std::exp(x);
            return e / (T(1) + e);
        },
        [](T, T y) { return y * (T(1) - y); });
}

template <typename T>
Tensor<T> gelu(const Tensor<T>& a) {
    constexpr double inv_sqrt2 = 0.70710678118654752440;
    constexpr double inv_sqrt2pi = 0.39894228040143267794;
    return detail::unary_op(
        a, "gelu",
        [=](T x) {
            const double xd = static_cast<double>(x);
            return static_cast<T>(0.5 * xd * (1.0 + std::erf(xd * inv_sqrt2)));
        },
        [=](T x, T) {
            const double xd = static_cast<double>(x);
            const double cdf = 0.5 * (1.0 + std::erf(xd * inv_sqrt2));
            const double pdf = inv_sqrt2pi * std::exp(-0.5 * xd * xd);
            return static_cast<T>(cdf + xd * pdf);
        });
}

template <typename T>
Tensor<T> abs(const Tensor<T>& a) {
    return detail::unary_op(
        a, "abs", [](T x) { return x < T(0) ? -x : x; },
        [](T x, T) { return x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0)); });
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T s) {
    return detail::unary_op(
        a, "add_scalar", [s](T x) { return x + s; }, [](T, T) { return T(1); });
}

template <typename T>
Tensor<T> mul_scalar(const Tensor<T>& a, T s) {
    return detail::unary_op(
        a, "mul_scalar", [s](T x) { return x * s; }, [s](T, T) { return s; });
}

// ---------------------------------------------------------------------------
// Reductions.
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> sum(const Tensor<T>& a) {
    T acc = T(0);
    for (T v : a.data()) acc += v;
    Tensor<T> out = Tensor<T>::scalar(acc);
    if (detail::recording(a)) {
        out.set_requires_grad(true);
        GradGraph<T>::active()->record([ai = a.ptr(), oi = out.ptr()]() {
            if (oi->grad.empty() || !ai->requires_grad) return;
            if (ai->grad.empty()) ai->grad.assign(ai->data.size(), T(0));
            const T g = oi->grad[0];
            for (T& gi : ai->grad) gi += g;
        });
    }
    return out;
}

template <typename T>
Tensor<T> mean(const Tensor<T>& a) {
    const T inv = T(1) / static_cast<T>(a.size());
    return mul_scalar(sum(a), inv);
}

// ---------------------------------------------------------------------------
// Matrix multiply: [m x k]@[k x n], or [b x m x k]@[b x k x n].
// ---------------------------------------------------------------------------

namespace detail {

// C[m x n] += A[m x k] * B[k x n]
template <typename T>
void gemm_acc(const T* A, const T* B, T* C, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const T* arow = A + i * k;
        T* crow = C + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const T av = arow[p];
            const T* brow = B + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

// C[m x k] += A[m x n] * B^T where B is [k x n]
template <typename T>
void gemm_nt_acc(const T* A, const T* B, T* C, std::size_t m, std::size_t n, std::size_t k) {
    for (std::size_t i = 0; i < m; ++i) {
        const T* arow = A + i * n;
        T* crow = C + i * k;
        for (std::size_t j = 0; j < k; ++j) {
            const T* brow = B + j * n;
            T acc = T(0);
            for (std::size_t p = 0; p < n; ++p) acc += arow[p] * brow[p];
            crow[j] += acc;
        }
    }
}

// C[k x n] += A^T * B where A is [m x k], B is [m x n]
template <typename T>
void gemm_tn_acc(const T* A, const T* B, T* C, std::size_t m, std::size_t k, std::size_t n) {
    for (std::size_t i = 0; i < m; ++i) {
        const T* arow = A + i * k;
        const T* brow = B + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const T av = arow[p];
            T* crow = C + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
        }
    }
}

}  // namespace detail

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
    const Shape& sa = a.shape();
    const Shape& sb = b.shape();
    const bool batched = sa.size() == 3;
    if (!((sa.size() == 2 && sb.size() == 2) || (sa.size() == 3 && sb.size() == 3))) {
        throw std::invalid_argument("matmul: expected two rank-2 or two rank-3 tensors, got " + shape_str(sa) +
                                    " and " + shape_str(sb));
    }
    if (batched && sa[0] != sb[0]) {
        throw std::invalid_argument("matmul: batch extents differ: " + shape_str(sa) + " vs " + shape_str(sb));
    }
    const std::size_t nbatch = batched ? sa[0] : 1;
    const std::size_t m = sa[batched ? 1 : 0];
    const std::size_t k = sa[batched ? 2 : 1];
    const std::size_t kb = sb[batched ? 1 : 0];
    const std::size_t n = sb[batched ? 2 : 1];
    if (k != kb) {
        throw std::invalid_argument("matmul: inner extents differ: " + shape_str(sa) + " vs " + shape_str(sb));
    }
    Shape so = batched ? Shape{nbatch, m, n} : Shape{m, n};
    Tensor<T> out(std::move(so));
    for (std::size_t batch = 0; batch < nbatch; ++batch) {
        detail::gemm_acc(a.data().data() + batch * m * k, b.data().data() + batch * k * n,
                         out.data().data() + batch * m * n, m, k, n);
    }
    if (detail::recording(a, b)) {
        out.set_requires_grad(true);
        GradGraph<T>::active()->record([ai = a.ptr(), bi = b.ptr(), oi = out.ptr(), nbatch, m, k, n]() {
            if (oi->grad.empty()) return;
            if (ai->requires_grad) {
                if (ai->grad.empty()) ai->grad.assign(ai->data.size(), T(0));
                for (std::size_t batch = 0; batch < nbatch; ++batch) {
                    // dA = dC * B^T
                    detail::gemm_nt_acc(oi->grad.data() + batch * m * n, bi->data.data() + batch * k * n,
                                        ai->grad.data() + batch * m * k, m, n, k);
                }
            }
            if (bi->requires_grad) {
                if (bi->grad.empty()) bi->grad.assign(bi->data.size(), T(0));
                for (std::size_t batch = 0; batch < nbatch; ++batch) {
                    // dB = A^T * dC
                    detail::gemm_tn_acc(ai->data.data() + batch * m * k, oi->grad.data() + batch * m * n,
                                        bi->grad.data() + batch * k * n, m, k, n);
                }
            }
        });
    }
    return out;
}

// Swap the last two axes (rank 2 or 3).
template <typename T>
Tensor<T> transpose_last2(const Tensor<T>& a) {
    const Shape& s = a.shape();
    if (s.size() != 2 && s.size() != 3) {
        throw std::invalid_argument("transpose_last2: expected rank 2 or 3, got " + shape_str(s));
    }
    const bool batched = s.size() == 3;
    const std::size_t nbatch = batched ? s[0] : 1;
    const std::size_t r = s[batched ? 1 : 0];
    const std::size_t c = s[batched ? 2 : 1];
    Shape so = batched ? Shape{nbatch, c, r} : Shape{c, r};
    Tensor<T> out(std::move(so));
    for (std::size_t batch = 0; batch < nbatch; ++batch) {
        const T* src = a.data().data() + batch * r * c;
        T* dst = out.data().data() + batch * r * c;
        for (std::size_t i = 0; i < r; ++i) {
            for (std::size_t j = 0; j < c; ++j) dst[j * r + i] = src[i * c + j];
        }
    }
    if (detail::recording(a)) {
        out.set_requires_grad(true);
        GradGraph<T>::active()->record([ai = a.ptr(), oi = out.ptr(), nbatch, r, c]() {
            if (oi->grad.empty() || !ai->requires_grad) return;
            if (ai->grad.empty()) ai->grad.assign(ai->data.size(), T(0));
            for (std::size_t batch = 0; batch < nbatch; ++batch) {
                const T* g = oi->grad.data() + batch * r * c;
                T* dst = ai->grad.data() + batch * r * c;
                for (std::size_t i = 0; i < r; ++i) {
                    for (std::size_t j = 0; j < c; ++j) dst[i * c + j] += g[j * r + i];
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Shape ops: reshape, narrow, concat, tile.
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape new_shape) {
    if (shape_numel(new_shape) != a.size()) {
        throw std::invalid_argument("reshape: " + shape_str(a.shape()) + " cannot be viewed as " +
                                    shape_str(new_shape));
    }
    Tensor<T> out(std::move(new_shape), a.data());
    if (detail::recording(a)) {
        out.set_requires_grad(true);
        GradGraph<T>::active()->record([ai = a.ptr(), oi = out.ptr()]() {
            if (oi->grad.empty() || !ai->requires_grad) return;
            if (ai->grad.empty()) ai->grad.assign(ai->data.size(), T(0));
            for (std::size_t i = 0; i < oi->grad.size(); ++i) ai->grad[i] += oi->grad[i];
        });
    }
    return out;
}

namespace detail {

// Decompose a shape around `axis` into outer x mid x inner for strided copies.
inline void axis_split(const Shape& s, std::size_t axis, std::size_t& outer, std::size_t& mid, std::size_t& inner) {
    outer = 1;
    inner = 1;
    for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
    mid = s[axis];
    for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
}

}  // namespace detail

// Contiguous slice of length `len` starting at `start` along `axis`.
template <typename T>
Tensor<T> narrow(const Tensor<T>& a, std::size_t axis, std::size_t start, std::size_t len) {
    const Shape& s = a.shape();
    if (axis >= s.size()) throw std::invalid_argument("narrow: axis out of range for " + shape_str(s));
    if (len == 0 || start + len > s[axis]) {
        throw std::invalid_argument("narrow: slice [" + std::to_string(start) + ", " + std::to_string(start + len) +
                                    ") out of range for axis " + std::to_string(axis) + " of " + shape_str(s));
    }
    std::size_t outer, mid, inner;
    detail::axis_split(s, axis, outer, mid, inner);
    Shape so = s;
    so[axis] = len;
    Tensor<T> out(std::move(so));
    for (std::size_t o = 0; o < outer; ++o) {
        const T* src = a.data().data() + (o * mid + start) * inner;
        T* dst = out.data().data() + o * len * inner;
        std::copy(src, src + len * inner, dst);
    }
    if (detail::recording(a)) {
        out.set_requires_grad(true);
        GradGraph<T>::active()->record([ai = a.ptr(), oi = out.ptr(), outer, mid, inner, start, len]() {
            if (oi->grad.empty() || !ai->requires_grad) return;
            if (ai->grad.empty()) ai->grad.assign(ai->data.size(), T(0));
            for (std::size_t o = 0; o < outer; ++o) {
                const T* g = oi->grad.data() + o * len * inner;
                T* dst = ai->grad.data() + (o * mid + start) * inner;
                for (std::size_t i = 0; i < len * inner; ++i) dst[i] += g[i];
            }
        });
    }
    return out;
}

template <typename T>
Tensor<T> concat(const std::vector<Tensor<T>>& parts, std::size_t axis) {
    if (parts.empty()) throw std::invalid_argument("concat: no inputs");
    const Shape& s0 = parts[0].shape();
    if (axis >= s0.size()) throw std::invalid_argument("concat: axis out of range for " + shape_str(s0));
    std::size_t total = 0;
    for (const Tensor<T>& p : parts) {
        const Shape& sp = p.shape();
        if (sp.size() != s0.size()) {
            throw std::invalid_argument("concat: rank mismatch: " + shape_str(s0) + " vs " + shape_str(sp));
        }
        for (std::size_t i = 0; i < sp.size(); ++i) {
            if (i != axis && sp[i] != s0[i]) {
                throw std::invalid_argument("concat: shapes " + shape_str(s0) + " and " + shape_str(sp) +
                                            " differ outside axis " + std::to_string(axis));
            }
        }
        total += sp[axis];
    }
    Shape so = s0;
    so[axis] = total;
    Tensor<T> out(so);
    std::size_t outer, mid_out, inner;
    detail::axis_split(so, axis, outer, mid_out, inner);
    std::size_t offset = 0;
    bool any_grad = false;
    for (const Tensor<T>& p : parts) {
        const std::size_t mid_p = p.shape()[axis];
        for (std::size_t o = 0; o < outer; ++o) {
            const T* src = p.data().data() + o * mid_p * inner;
            T* dst = out.data().data() + (o * mid_out + offset) * inner;
            std::copy(src, src + mid_p * inner, dst);
        }
        offset += mid_p;
        any_grad = any_grad || p.requires_grad();
    }
    if (GradGraph<T>::active() != nullptr && any_grad) {
        out.set_requires_grad(true);
        std::vector<std::shared_ptr<TensorData<T>>> impls;
        std::vector<std::size_t> mids;
        impls.reserve(parts.size());
        for (const Tensor<T>& p : parts) {
            impls.push_back(p.ptr());
            mids.push_back(p.shape()[axis]);
        }
        GradGraph<T>::active()->record([impls, mids, oi = out.ptr(), outer, mid_out, inner]() {
            if (oi->grad.empty()) return;
            std::size_t off = 0;
            for (std::size_t pi = 0; pi < impls.size(); ++pi) {
                auto& part = impls[pi];
                const std::size_t mid_p = mids[pi];
                if (part->requires_grad) {
                    if (part->grad.empty()) part->grad.assign(part->data.size(), T(0));
                    for (std::size_t o = 0; o < outer; ++o) {
                        const T* g = oi->grad.data() + (o * mid_out + off) * inner;
                        T* dst = part->grad.data() + o * mid_p * inner;
                        for (std::size_t i = 0; i < mid_p * inner; ++i) dst[i] += g[i];
                    }
                }
                off += mid_p;
            }
        });
    }
    return out;
}

// Stack `copies` copies of `a` along a new leading axis; the backward pass
// sums the incoming gradients over that axis.
template <typename T>
Tensor<T> tile_batch(const Tensor<T>& a, std::size_t copies) {
    if (copies == 0) throw std::invalid_argument("tile_batch: copies must be positive");
    Shape so;
    so.push_back(copies);
    for (std::size_t e : a.shape()) so.push_back(e);
    Tensor<T> out(std::move(so));
    const std::size_t n = a.size();
    for (std::size_t c = 0; c < copies; ++c) {
        std::copy(a.data().begin(), a.data().end(), out.data().begin() + c * n);
    }
    if (detail::recording(a)) {
        out.set_requires_grad(true);
        GradGraph<T>::active()->record([ai = a.ptr(), oi = out.ptr(), copies, n]() {
            if (oi->grad.empty() || !ai->requires_grad) return;
            if (ai->grad.empty()) ai->grad.assign(n, T(0));
            for (std::size_t c = 0; c < copies; ++c) {
                const T* g = oi->grad.data() + c * n;
                for (std::size_t i = 0; i < n; ++i) ai->grad[i] += g[i];
            }
        });
    }
    return out;
}

// Row lookup into an embedding table; backward scatter-adds into the table.
template <typename T>
Tensor<T> embedding(const Tensor<T>& table, const std::vector<int>& ids) {
    const Shape& s = table.shape();
    if (s.size() != 2) throw std::invalid_argument("embedding: table must be rank 2, got " + shape_str(s));
    const std::size_t v = s[0];
    const std::size_t d = s[1];
    if (ids.empty()) throw std::invalid_argument("embedding: empty id list");
    for (int id : ids) {
        if (id < 0 || static_cast<std::size_t>(id) >= v) {
            throw std::invalid_argument("embedding: id " + std::to_string(id) + " out of range for table with " +
                                        std::to_string(v) + " rows");
        }
    }
    Tensor<T> out(Shape{ids.size(), d});
    for (std::size_t i = 0; i < ids.size(); ++i) {
        const T* src = table.data().data() + static_cast<std::size_t>(ids[i]) * d;
        std::copy(src, src + d, out.data().data() + i * d);
    }
    if (detail::recording(table)) {
        out.set_requires_grad(true);
        GradGraph<T>::active()->record([ti = table.ptr(), oi = out.ptr(), ids, d]() {
            if (oi->grad.empty() || !ti->requires_grad) return;
            if (ti->grad.empty()) ti->grad.assign(ti->data.size(), T(0));
            for (std::size_t i = 0; i < ids.size(); ++i) {
                const T* g = oi->grad.data() + i * d;
                T* dst = ti->grad.data() + static_cast<std::size_t>(ids[i]) * d;
                for (std::size_t j = 0; j < d; ++j) dst[j] += g[j];
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Normalization and losses.
// ---------------------------------------------------------------------------

// Stable softmax over the last axis (max-subtracted).
template <typename T>
Tensor<T> softmax_last_dim(const Tensor<T>& a) {
    const Shape& s = a.shape();
    if (s.empty()) throw std::invalid_argument("softmax_last_dim: rank must be >= 1");
    const std::size_t d = s.back();
    const std::size_t rows = a.size() / d;
    Tensor<T> out(s);
    for (std::size_t r = 0; r < rows; ++r) {
        const T* x = a.data().data() + r * d;
        T* y = out.data().data() + r * d;
        T mx = x[0];
        for (std::size_t j = 1; j < d; ++j) mx = std::max(mx, x[j]);
        T denom = T(0);
        for (std::size_t j = 0; j < d; ++j) {
            y[j] = std::exp(x[j] - mx);
            denom += y[j];
        }
        for (std::size_t j = 0; j < d; ++j) y[j] /= denom;
    }
    if (detail::recording(a)) {
        out.set_requires_grad(true);
        GradGraph<T>::active()->record([ai = a.ptr(), oi = out.ptr(), rows, d]() {
            if (oi->grad.empty() || !ai->requires_grad) return;
            if (ai->grad.empty()) ai->grad.assign(ai->data.size(), T(0));
            for (std::size_t r = 0; r < rows; ++r) {
                const T* y = oi->data.data() + r * d;
                const T* g = oi->grad.data() + r * d;
                T dot = T(0);
                for (std::size_t j = 0; j < d; ++j) dot += y[j] * g[j];
                T* dst = ai->grad.data() + r * d;
                for (std::size_t j = 0; j < d; ++j) dst[j] += y[j] * (g[j] - dot);
            }
        });
    }
    return out;
}

// Normalize each last-axis slice to zero mean / unit variance (population
// variance), then scale and shift by gamma/beta.
template <typename T>
Tensor<T> layer_norm(const Tensor<T>& x, const Tensor<T>& gamma, const Tensor<T>& beta, T eps) {
    const Shape& s = x.shape();
    if (s.empty()) throw std::invalid_argument("layer_norm: rank must be >= 1");
    const std::size_t d = s.back();
    if (gamma.size() != d || beta.size() != d) {
        throw std::invalid_argument("layer_norm: gamma " + shape_str(gamma.shape()) + " / beta " +
                                    shape_str(beta.shape()) + " must match last extent " + std::to_string(d));
    }
    if (!(eps > T(0))) throw std::invalid_argument("layer_norm: eps must be positive");
    const std::size_t rows = x.size() / d;
    Tensor<T> out(s);
    // Cache the normalized values and inverse stddevs for the backward pass.
    auto xhat = std::make_shared<std::vector<T>>(x.size());
    auto inv_std = std::make_shared<std::vector<T>>(rows);
    for (std::size_t r = 0; r < rows; ++r) {
        const T* xr = x.data().data() + r * d;
        T mu = T(0);
        for (std::size_t j = 0; j < d; ++j) mu += xr[j];
        mu /= static_cast<T>(d);
        T var = T(0);
        for (std::size_t j = 0; j < d; ++j) var += (xr[j] - mu) * (xr[j] - mu);
        var /= static_cast<T>(d);
        const T istd = T(1) / std::sqrt(var + eps);
        (*inv_std)[r] = istd;
        T* yr = out.data().data() + r * d;
        for (std::size_t j = 0; j < d; ++j) {
            const T h = (xr[j] - mu) * istd;
            (*xhat)[r * d + j] = h;
            yr[j] = gamma.at(j) * h + beta.at(j);
        }
    }
    if (GradGraph<T>::active() != nullptr &&
        (x.requires_grad() || gamma.requires_grad() || beta.requires_grad())) {
        Tensor<T>& mout = out;
        mout.set_requires_grad(true);
        GradGraph<T>::active()->record(
            [xi = x.ptr(), gi = gamma.ptr(), bi = beta.ptr(), oi = out.ptr(), xhat, inv_std, rows, d]() {
                if (oi->grad.empty()) return;
                if (bi->requires_grad && bi->grad.empty()) bi->grad.assign(d, T(0));
                if (gi->requires_grad && gi->grad.empty()) gi->grad.assign(d, T(0));
                if (xi->requires_grad && xi->grad.empty()) xi->grad.assign(xi->data.size(), T(0));
                for (std::size_t r = 0; r < rows; ++r) {
                    const T* g = oi->grad.data() + r * d;
                    const T* h = xhat->data() + r * d;
                    if (bi->requires_grad) {
                        for (std::size_t j = 0; j < d; ++j) bi->grad[j] += g[j];
                    }
                    if (gi->requires_grad) {
                        for (std::size_t j = 0; j < d; ++j) gi->grad[j] += g[j] * h[j];
                    }
                    if (xi->requires_grad) {
                        // dxhat = g * gamma; dx = istd * (dxhat - mean(dxhat) - xhat * mean(dxhat*xhat))
                        T mean_dh = T(0);
                        T mean_dh_h = T(0);
                        for (std::size_t j = 0; j < d; ++j) {
                            const T dh = g[j] * gi->data[j];
                            mean_dh += dh;
                            mean_dh_h += dh * h[j];
                        }
                        mean_dh /= static_cast<T>(d);
                        mean_dh_h /= static_cast<T>(d);
                        T* dst = xi->grad.data() + r * d;
                        const T istd = (*inv_std)[r];
                        for (std::size_t j = 0; j < d; ++j) {
                            const T dh = g[j] * gi->data[j];
                            dst[j] += istd * (dh - mean_dh - h[j] * mean_dh_h);
                        }
                    }
                }
            });
    }
    return out;
}

// Mean over the batch of -log softmax(logits)[target].
template <typename T>
Tensor<T> cross_entropy(const Tensor<T>& logits, const std::vector<int>& targets) {
    const Shape& s = logits.shape();
    if (s.size() != 2) throw std::invalid_argument("cross_entropy: logits must be rank 2, got " + shape_str(s));
    const std::size_t b = s[0];
    const std::size_t c = s[1];
    if (targets.size() != b) {
        throw std::invalid_argument("cross_entropy: batch " + std::to_string(b) + " but " +
                                    std::to_string(targets.size()) + " targets");
    }
    for (int t : targets) {
        if (t < 0 || static_cast<std::size_t>(t) >= c) {
            throw std::invalid_argument("cross_entropy: target " + std::to_string(t) + " out of range [0, " +
                                        std::to_string(c) + ")");
        }
    }
    // Cache softmax for the backward rule.
    auto probs = std::make_shared<std::vector<T>>(logits.size());
    T loss = T(0);
    for (std::size_t i = 0; i < b; ++i) {
        const T* x = logits.data().data() + i * c;
        T mx = x[0];
        for (std::size_t j = 1; j < c; ++j) mx = std::max(mx, x[j]);
        T denom = T(0);
        for (std::size_t j = 0; j < c; ++j) {
            const T e = std::exp(x[j] - mx);
            (*probs)[i * c + j] = e;
            denom += e;
        }
        for (std::size_t j = 0; j < c; ++j) (*probs)[i * c + j] /= denom;
        const T lse = std::log(denom) + mx;
        loss += lse - x[static_cast<std::size_t>(targets[i])];
    }
    loss /= static_cast<T>(b);
    Tensor<T> out = Tensor<T>::scalar(loss);
    if (detail::recording(logits)) {
        out.set_requires_grad(true);
        GradGraph<T>::active()->record([li = logits.ptr(), oi = out.ptr(), probs, targets, b, c]() {
            if (oi->grad.empty() || !li->requires_grad) return;
            if (li->grad.empty()) li->grad.assign(li->data.size(), T(0));
            const T g = oi->grad[0] / static_cast<T>(b);
            for (std::size_t i = 0; i < b; ++i) {
                T* dst = li->grad.data() + i * c;
                const T* p = probs->data() + i * c;
                for (std::size_t j = 0; j < c; ++j) {
                    dst[j] += g * (p[j] - (static_cast<std::size_t>(targets[i]) == j ? T(1) : T(0)));
                }
            }
        });
    }
    return out;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient oracle (central differences, no tape involved).
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> finite_difference_gradient(const std::function<T(const Tensor<T>&)>& f, const Tensor<T>& x, T h) {
    if (!(h > T(0))) throw std::invalid_argument("finite_difference_gradient: h must be positive");
    Tensor<T> probe(x.shape(), x.data());
    Tensor<T> g(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i) {
        const T keep = probe.at(i);
        probe.at(i) = keep + h;
        const T up = f(probe);
        probe.at(i) = keep - h;
        const T down = f(probe);
        probe.at(i) = keep;
        g.at(i) = (up - down) / (T(2) * h);
    }
    return g;
}

}  // namespace vqla

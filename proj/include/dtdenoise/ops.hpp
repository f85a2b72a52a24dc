// Copyright (c) 2026 The dtdenoise Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <functional>
#include <utility>
#include <vector>

#include "dtdenoise/errors.hpp"
#include "dtdenoise/graph.hpp"
#include "dtdenoise/tensor.hpp"

// Differentiable elementwise, linear-algebra, and normalization ops.
// Every op validates shapes before touching data, computes the forward
// value, and installs a backward_fn that adds its contribution into the
// parents' gradient buffers.

namespace dtd {

namespace detail {

// Decomposes a shape around one axis: index = (o * len + c) * inner + i.
struct AxisSplit {
  i64 outer = 1;
  i64 len = 1;
  i64 inner = 1;
};

inline AxisSplit split_at(const Shape& s, int axis) {
  if (axis < 0 || axis >= static_cast<int>(s.size())) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  }
  AxisSplit sp;
  for (int d = 0; d < axis; ++d) sp.outer *= s[d];
  sp.len = s[axis];
  for (int d = axis + 1; d < static_cast<int>(s.size()); ++d) sp.inner *= s[d];
  return sp;
}

}  // namespace detail

/// Builds an op node. When no parent participates in differentiation the
/// tape is dropped entirely, so pure inference retains only the values it
/// is still holding on to.
template <typename T>
Var<T> make_op(Tensor<T> value, std::vector<Var<T>> parents, std::function<void(Node<T>&)> fn) {
  if (!any_requires_grad(parents)) return make_const(std::move(value));
  auto n = std::make_shared<Node<T>>();
  n->value = std::move(value);
  n->parents = std::move(parents);
  n->requires_grad = true;
  n->backward_fn = std::move(fn);
  return n;
}

template <typename T>
Var<T> add(const Var<T>& a, const Var<T>& b) {
  if (!a->value.same_shape(b->value)) {
    throw ShapeError("add: " + shape_str(a->value.shape()) + " vs " + shape_str(b->value.shape()));
  }
  Tensor<T> out(a->value.shape());
  const T* pa = a->value.data();
  const T* pb = b->value.data();
  T* po = out.data();
  for (i64 i = 0; i < out.size(); ++i) po[i] = pa[i] + pb[i];
  return make_op<T>(std::move(out), {a, b}, [a, b](Node<T>& n) {
    accumulate_grad(a, n.grad);
    accumulate_grad(b, n.grad);
  });
}

template <typename T>
Var<T> sub(const Var<T>& a, const Var<T>& b) {
  if (!a->value.same_shape(b->value)) {
    throw ShapeError("sub: " + shape_str(a->value.shape()) + " vs " + shape_str(b->value.shape()));
  }
  Tensor<T> out(a->value.shape());
  const T* pa = a->value.data();
  const T* pb = b->value.data();
  T* po = out.data();
  for (i64 i = 0; i < out.size(); ++i) po[i] = pa[i] - pb[i];
  return make_op<T>(std::move(out), {a, b}, [a, b](Node<T>& n) {
    accumulate_grad(a, n.grad);
    if (b->requires_grad) {
      T* gb = b->ensure_grad().data();
      const T* g = n.grad.data();
      for (i64 i = 0; i < n.grad.size(); ++i) gb[i] -= g[i];
    }
  });
}

template <typename T>
Var<T> scale(const Var<T>& a, T factor) {
  Tensor<T> out(a->value.shape());
  const T* pa = a->value.data();
  T* po = out.data();
  for (i64 i = 0; i < out.size(); ++i) po[i] = factor * pa[i];
  return make_op<T>(std::move(out), {a}, [a, factor](Node<T>& n) {
    if (!a->requires_grad) return;
    T* ga = a->ensure_grad().data();
    const T* g = n.grad.data();
    for (i64 i = 0; i < n.grad.size(); ++i) ga[i] += factor * g[i];
  });
}

/// y = x for x >= 0, slope * x otherwise. Slope must lie in (0, 1).
template <typename T>
Var<T> leaky_relu(const Var<T>& a, T slope = T(0.01)) {
  if (!(slope > T(0) && slope < T(1))) throw ConfigError("leaky_relu: slope must be in (0,1)");
  Tensor<T> out(a->value.shape());
  const T* pa = a->value.data();
  T* po = out.data();
  for (i64 i = 0; i < out.size(); ++i) po[i] = pa[i] >= T(0) ? pa[i] : slope * pa[i];
  return make_op<T>(std::move(out), {a}, [a, slope](Node<T>& n) {
    if (!a->requires_grad) return;
    T* ga = a->ensure_grad().data();
    const T* g = n.grad.data();
    const T* x = a->value.data();
    for (i64 i = 0; i < n.grad.size(); ++i) ga[i] += g[i] * (x[i] >= T(0) ? T(1) : slope);
  });
}

/// Shape change sharing the underlying buffer; total size must match.
template <typename T>
Var<T> reshape(const Var<T>& a, const Shape& shape) {
  Tensor<T> out = a->value.reshaped(shape);
  Shape orig = a->value.shape();
  return make_op<T>(std::move(out), {a}, [a, orig](Node<T>& n) {
    accumulate_grad(a, n.grad.reshaped(orig));
  });
}

/// General axis permutation: out axis i takes input axis perm[i].
template <typename T>
Var<T> permute(const Var<T>& a, const std::vector<int>& perm) {
  const Shape& in = a->value.shape();
  const int r = static_cast<int>(in.size());
  if (static_cast<int>(perm.size()) != r) throw ShapeError("permute: rank mismatch");
  std::vector<bool> used(r, false);
  Shape os(r);
  for (int i = 0; i < r; ++i) {
    if (perm[i] < 0 || perm[i] >= r || used[perm[i]]) throw ShapeError("permute: invalid permutation");
    used[perm[i]] = true;
    os[i] = in[perm[i]];
  }
  std::vector<i64> in_strides(r, 1), out_strides(r, 1);
  for (int i = r - 2; i >= 0; --i) in_strides[i] = in_strides[i + 1] * in[i + 1];
  for (int i = r - 2; i >= 0; --i) out_strides[i] = out_strides[i + 1] * os[i + 1];
  // Stride of output axis i in the input buffer.
  std::vector<i64> map_strides(r);
  for (int i = 0; i < r; ++i) map_strides[i] = in_strides[perm[i]];
  Tensor<T> out(os);
  const T* pa = a->value.data();
  T* po = out.data();
  const i64 total = out.size();
  std::vector<i64> idx(r, 0);
  i64 src = 0;
  for (i64 flat = 0; flat < total; ++flat) {
    po[flat] = pa[src];
    for (int d = r - 1; d >= 0; --d) {
      if (++idx[d] < os[d]) {
        src += map_strides[d];
        break;
      }
      idx[d] = 0;
      src -= map_strides[d] * (os[d] - 1);
    }
  }
  return make_op<T>(std::move(out), {a}, [a, os, map_strides, r](Node<T>& n) {
    if (!a->requires_grad) return;
    T* ga = a->ensure_grad().data();
    const T* g = n.grad.data();
    std::vector<i64> idx(r, 0);
    i64 src = 0;
    for (i64 flat = 0; flat < n.grad.size(); ++flat) {
      ga[src] += g[flat];
      for (int d = r - 1; d >= 0; --d) {
        if (++idx[d] < os[d]) {
          src += map_strides[d];
          break;
        }
        idx[d] = 0;
        src -= map_strides[d] * (os[d] - 1);
      }
    }
  });
}

/// Affine map over the last axis: out[..., n] = sum_k x[..., k] w[k, n] + b[n].
/// Leading axes are treated as one batch axis. Bias may be a null Var.
template <typename T>
Var<T> linear(const Var<T>& x, const Var<T>& w, const Var<T>& b) {
  const Shape& xs = x->value.shape();
  if (xs.size() < 2) throw ShapeError("linear: input rank must be >= 2, got " + shape_str(xs));
  if (w->value.rank() != 2) throw ShapeError("linear: weight must be rank 2");
  const i64 K = xs.back();
  const i64 N = w->value.dim(1);
  if (w->value.dim(0) != K) {
    throw ShapeError("linear: weight " + shape_str(w->value.shape()) + " does not accept width " +
                     std::to_string(K));
  }
  if (b && (b->value.rank() != 1 || b->value.dim(0) != N)) throw ShapeError("linear: bad bias shape");
  const i64 M = x->value.size() / K;
  Shape os = xs;
  os.back() = N;
  Tensor<T> out(os);
  const T* px = x->value.data();
  const T* pw = w->value.data();
  const T* pb = b ? b->value.data() : nullptr;
  T* po = out.data();
  for (i64 m = 0; m < M; ++m) {
    T* orow = po + m * N;
    if (pb) {
      for (i64 n = 0; n < N; ++n) orow[n] = pb[n];
    } else {
      for (i64 n = 0; n < N; ++n) orow[n] = T(0);
    }
    const T* xrow = px + m * K;
    for (i64 k = 0; k < K; ++k) {
      const T xv = xrow[k];
      const T* wrow = pw + k * N;
      for (i64 n = 0; n < N; ++n) orow[n] += xv * wrow[n];
    }
  }
  return make_op<T>(std::move(out), {x, w, b}, [x, w, b, M, K, N](Node<T>& n) {
    const T* g = n.grad.data();
    const T* px = x->value.data();
    const T* pw = w->value.data();
    if (x->requires_grad) {
      T* gx = x->ensure_grad().data();
      for (i64 m = 0; m < M; ++m) {
        const T* grow = g + m * N;
        T* gxrow = gx + m * K;
        for (i64 k = 0; k < K; ++k) {
          const T* wrow = pw + k * N;
          T acc = T(0);
          for (i64 c = 0; c < N; ++c) acc += grow[c] * wrow[c];
          gxrow[k] += acc;
        }
      }
    }
    if (w->requires_grad) {
      T* gw = w->ensure_grad().data();
      for (i64 m = 0; m < M; ++m) {
        const T* grow = g + m * N;
        const T* xrow = px + m * K;
        for (i64 k = 0; k < K; ++k) {
          const T xv = xrow[k];
          T* gwrow = gw + k * N;
          for (i64 c = 0; c < N; ++c) gwrow[c] += xv * grow[c];
        }
      }
    }
    if (b && b->requires_grad) {
      T* gb = b->ensure_grad().data();
      for (i64 m = 0; m < M; ++m) {
        const T* grow = g + m * N;
        for (i64 c = 0; c < N; ++c) gb[c] += grow[c];
      }
    }
  });
}

/// Per-index scale and shift along one axis: out = x * gain[c] + shift[c]
/// with c the coordinate along `axis`.
template <typename T>
Var<T> affine_axis(const Var<T>& x, const Var<T>& gain, const Var<T>& shift, int axis) {
  const auto sp = detail::split_at(x->value.shape(), axis);
  if (gain->value.rank() != 1 || gain->value.dim(0) != sp.len ||
      shift->value.rank() != 1 || shift->value.dim(0) != sp.len) {
    throw ShapeError("affine_axis: gain/shift must be rank 1 of length " + std::to_string(sp.len));
  }
  Tensor<T> out(x->value.shape());
  const T* px = x->value.data();
  const T* pg = gain->value.data();
  const T* ps = shift->value.data();
  T* po = out.data();
  for (i64 o = 0; o < sp.outer; ++o) {
    for (i64 c = 0; c < sp.len; ++c) {
      const i64 base = (o * sp.len + c) * sp.inner;
      for (i64 i = 0; i < sp.inner; ++i) po[base + i] = px[base + i] * pg[c] + ps[c];
    }
  }
  return make_op<T>(std::move(out), {x, gain, shift}, [x, gain, shift, sp](Node<T>& n) {
    const T* g = n.grad.data();
    const T* px = x->value.data();
    const T* pg = gain->value.data();
    T* gx = x->requires_grad ? x->ensure_grad().data() : nullptr;
    T* gg = gain->requires_grad ? gain->ensure_grad().data() : nullptr;
    T* gs = shift->requires_grad ? shift->ensure_grad().data() : nullptr;
    for (i64 o = 0; o < sp.outer; ++o) {
      for (i64 c = 0; c < sp.len; ++c) {
        const i64 base = (o * sp.len + c) * sp.inner;
        T acc_g = T(0), acc_s = T(0);
        for (i64 i = 0; i < sp.inner; ++i) {
          const T gv = g[base + i];
          if (gx) gx[base + i] += gv * pg[c];
          acc_g += gv * px[base + i];
          acc_s += gv;
        }
        if (gg) gg[c] += acc_g;
        if (gs) gs[c] += acc_s;
      }
    }
  });
}

/// Layer normalization along `axis`. Each slice (all other indices fixed)
/// is shifted to mean 0 and scaled to unit variance, then optionally run
/// through an affine with per-coordinate gain/shift along the same axis.
/// Pass null gain and shift to skip the affine.
template <typename T>
Var<T> layer_norm(const Var<T>& x, int axis, const Var<T>& gain, const Var<T>& shift,
                  T eps = T(1e-8)) {
  const auto sp = detail::split_at(x->value.shape(), axis);
  const bool affine = static_cast<bool>(gain);
  if (static_cast<bool>(gain) != static_cast<bool>(shift)) {
    throw ConfigError("layer_norm: gain and shift must be supplied together");
  }
  if (affine && (gain->value.rank() != 1 || gain->value.dim(0) != sp.len ||
                 shift->value.rank() != 1 || shift->value.dim(0) != sp.len)) {
    throw ShapeError("layer_norm: gain/shift must be rank 1 of length " + std::to_string(sp.len));
  }
  const i64 L = sp.len;
  Tensor<T> xhat(x->value.shape());
  Tensor<T> inv_std({sp.outer * sp.inner});
  Tensor<T> out(x->value.shape());
  const T* px = x->value.data();
  T* ph = xhat.data();
  T* pv = inv_std.data();
  T* po = out.data();
  const T* pg = affine ? gain->value.data() : nullptr;
  const T* ps = affine ? shift->value.data() : nullptr;
  for (i64 o = 0; o < sp.outer; ++o) {
    for (i64 i = 0; i < sp.inner; ++i) {
      const i64 base = o * L * sp.inner + i;
      T mean = T(0);
      for (i64 c = 0; c < L; ++c) mean += px[base + c * sp.inner];
      mean /= T(L);
      T var = T(0);
      for (i64 c = 0; c < L; ++c) {
        const T d = px[base + c * sp.inner] - mean;
        var += d * d;
      }
      var /= T(L);
      const T istd = T(1) / std::sqrt(var + eps);
      pv[o * sp.inner + i] = istd;
      for (i64 c = 0; c < L; ++c) {
        const i64 at = base + c * sp.inner;
        const T h = (px[at] - mean) * istd;
        ph[at] = h;
        po[at] = affine ? h * pg[c] + ps[c] : h;
      }
    }
  }
  return make_op<T>(std::move(out), {x, gain, shift},
                    [x, gain, shift, sp, xhat, inv_std, affine](Node<T>& n) {
    const i64 L = sp.len;
    const T* g = n.grad.data();
    const T* ph = xhat.data();
    const T* pv = inv_std.data();
    const T* pg = affine ? gain->value.data() : nullptr;
    T* gx = x->requires_grad ? x->ensure_grad().data() : nullptr;
    T* gg = affine && gain->requires_grad ? gain->ensure_grad().data() : nullptr;
    T* gs = affine && shift->requires_grad ? shift->ensure_grad().data() : nullptr;
    for (i64 o = 0; o < sp.outer; ++o) {
      for (i64 i = 0; i < sp.inner; ++i) {
        const i64 base = o * L * sp.inner + i;
        const T istd = pv[o * sp.inner + i];
        T sum_gh = T(0), sum_gh_h = T(0);
        for (i64 c = 0; c < L; ++c) {
          const i64 at = base + c * sp.inner;
          const T ghat = affine ? g[at] * pg[c] : g[at];
          sum_gh += ghat;
          sum_gh_h += ghat * ph[at];
          if (gg) gg[c] += g[at] * ph[at];
          if (gs) gs[c] += g[at];
        }
        if (gx) {
          for (i64 c = 0; c < L; ++c) {
            const i64 at = base + c * sp.inner;
            const T ghat = affine ? g[at] * pg[c] : g[at];
            gx[at] += istd / T(L) * (T(L) * ghat - sum_gh - ph[at] * sum_gh_h);
          }
        }
      }
    }
  });
}

/// Sum of all entries, returned as a shape-{1} scalar.
template <typename T>
Var<T> sum_all(const Var<T>& x) {
  Tensor<T> out({1});
  const T* px = x->value.data();
  T acc = T(0);
  for (i64 i = 0; i < x->value.size(); ++i) acc += px[i];
  out[0] = acc;
  return make_op<T>(std::move(out), {x}, [x](Node<T>& n) {
    if (!x->requires_grad) return;
    T* gx = x->ensure_grad().data();
    const T g = n.grad[0];
    for (i64 i = 0; i < x->value.size(); ++i) gx[i] += g;
  });
}

/// Mean squared difference restricted to the given flat indices.
template <typename T>
Var<T> masked_mse(const Var<T>& pred, const Var<T>& target, const std::vector<i64>& indices) {
  if (!pred->value.same_shape(target->value)) {
    throw ShapeError("masked_mse: " + shape_str(pred->value.shape()) + " vs " +
                     shape_str(target->value.shape()));
  }
  if (indices.empty()) throw ConfigError("masked_mse: empty index set");
  const i64 total = pred->value.size();
  for (i64 idx : indices) {
    if (idx < 0 || idx >= total) throw ShapeError("masked_mse: index out of range");
  }
  const T* pp = pred->value.data();
  const T* pt = target->value.data();
  T acc = T(0);
  for (i64 idx : indices) {
    const T d = pp[idx] - pt[idx];
    acc += d * d;
  }
  Tensor<T> out({1});
  out[0] = acc / T(indices.size());
  return make_op<T>(std::move(out), {pred, target}, [pred, target, indices](Node<T>& n) {
    const T f = n.grad[0] * T(2) / T(indices.size());
    const T* pp = pred->value.data();
    const T* pt = target->value.data();
    T* gp = pred->requires_grad ? pred->ensure_grad().data() : nullptr;
    T* gt = target->requires_grad ? target->ensure_grad().data() : nullptr;
    for (i64 idx : indices) {
      const T d = f * (pp[idx] - pt[idx]);
      if (gp) gp[idx] += d;
      if (gt) gt[idx] -= d;
    }
  });
}

template <typename T>
struct MlpParams {
  Var<T> w1, b1, w2, b2;
};

/// Two affine layers with a LeakyReLU between, acting on the last axis.
template <typename T>
Var<T> mlp(const Var<T>& x, const MlpParams<T>& p, T slope = T(0.01)) {
  return linear(leaky_relu(linear(x, p.w1, p.b1), slope), p.w2, p.b2);
}

}  // namespace dtd

// Copyright (c) 2026 The dtdenoise Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <limits>
#include <vector>

#include "dtdenoise/errors.hpp"
#include "dtdenoise/graph.hpp"
#include "dtdenoise/ops.hpp"
#include "dtdenoise/tensor.hpp"

// Multi-head self-attention inside non-overlapping square windows.
// Every window attends independently; a learnable relative-position bias
// indexed by the (dy, dx) between two tokens of a window is added to the
// attention logits before the softmax.

namespace dtd {

template <typename T>
struct MsaParams {
  Var<T> wq, bq;          // (C,C), (C)
  Var<T> wk, bk;
  Var<T> wv, bv;
  Var<T> wo, bo;
  Var<T> bias_table;      // ((2*window-1)^2, heads)
};

/// Optional forward instrumentation: post-softmax attention weights,
/// shaped (num_windows, heads, tokens, tokens).
template <typename T>
struct MsaTrace {
  Tensor<T> probs;
};

namespace detail {

template <typename T>
void matmul_bias(const T* x, const T* w, const T* bias, T* out, i64 M, i64 K, i64 N) {
  for (i64 m = 0; m < M; ++m) {
    T* orow = out + m * N;
    if (bias) {
      for (i64 n = 0; n < N; ++n) orow[n] = bias[n];
    } else {
      for (i64 n = 0; n < N; ++n) orow[n] = T(0);
    }
    const T* xrow = x + m * K;
    for (i64 k = 0; k < K; ++k) {
      const T xv = xrow[k];
      const T* wrow = w + k * N;
      for (i64 n = 0; n < N; ++n) orow[n] += xv * wrow[n];
    }
  }
}

// acc[m,k] += sum_n g[m,n] * w[k,n]
template <typename T>
void matmul_bt_acc(const T* g, const T* w, T* acc, i64 M, i64 K, i64 N) {
  for (i64 m = 0; m < M; ++m) {
    const T* grow = g + m * N;
    T* arow = acc + m * K;
    for (i64 k = 0; k < K; ++k) {
      const T* wrow = w + k * N;
      T s = T(0);
      for (i64 n = 0; n < N; ++n) s += grow[n] * wrow[n];
      arow[k] += s;
    }
  }
}

// acc[k,n] += sum_m x[m,k] * g[m,n]
template <typename T>
void atb_acc(const T* x, const T* g, T* acc, i64 M, i64 K, i64 N) {
  for (i64 m = 0; m < M; ++m) {
    const T* xrow = x + m * K;
    const T* grow = g + m * N;
    for (i64 k = 0; k < K; ++k) {
      const T xv = xrow[k];
      T* arow = acc + k * N;
      for (i64 n = 0; n < N; ++n) arow[n] += xv * grow[n];
    }
  }
}

template <typename T>
void colsum_acc(const T* g, T* acc, i64 M, i64 N) {
  for (i64 m = 0; m < M; ++m) {
    const T* grow = g + m * N;
    for (i64 n = 0; n < N; ++n) acc[n] += grow[n];
  }
}

struct WinGeom {
  i64 N, H, W, C, win, heads, dh, nwy, nwx, NW, Tk;
};

// Maps window nw, token t to the flat row index in (N*H*W, C).
inline i64 win_row(const WinGeom& g, i64 nw, i64 t) {
  const i64 n = nw / (g.nwy * g.nwx);
  const i64 wy = (nw / g.nwx) % g.nwy;
  const i64 wx = nw % g.nwx;
  const i64 ty = t / g.win;
  const i64 tx = t % g.win;
  return (n * g.H + wy * g.win + ty) * g.W + wx * g.win + tx;
}

template <typename T>
void win_gather(const WinGeom& g, const T* flat, T* win) {
  for (i64 nw = 0; nw < g.NW; ++nw) {
    for (i64 t = 0; t < g.Tk; ++t) {
      const T* src = flat + win_row(g, nw, t) * g.C;
      T* dst = win + (nw * g.Tk + t) * g.C;
      for (i64 c = 0; c < g.C; ++c) dst[c] = src[c];
    }
  }
}

template <typename T>
void win_scatter(const WinGeom& g, const T* win, T* flat) {
  for (i64 nw = 0; nw < g.NW; ++nw) {
    for (i64 t = 0; t < g.Tk; ++t) {
      const T* src = win + (nw * g.Tk + t) * g.C;
      T* dst = flat + win_row(g, nw, t) * g.C;
      for (i64 c = 0; c < g.C; ++c) dst[c] = src[c];
    }
  }
}

}  // namespace detail

/// Windowed multi-head attention over an NHWC feature map. H and W must be
/// divisible by `window` and C by `heads`. Output shape equals input shape.
template <typename T>
Var<T> window_msa(const Var<T>& x, const MsaParams<T>& p, int window, int heads,
                  MsaTrace<T>* trace = nullptr) {
  if (x->value.rank() != 4) throw ShapeError("window_msa: input must be NHWC");
  detail::WinGeom g;
  g.N = x->value.dim(0);
  g.H = x->value.dim(1);
  g.W = x->value.dim(2);
  g.C = x->value.dim(3);
  if (window < 1 || heads < 1) throw ConfigError("window_msa: window and heads must be >= 1");
  if (g.H % window != 0 || g.W % window != 0) {
    throw ConfigError("window_msa: spatial dims " + std::to_string(g.H) + "x" +
                      std::to_string(g.W) + " not divisible by window " + std::to_string(window));
  }
  if (g.C % heads != 0) {
    throw ConfigError("window_msa: C " + std::to_string(g.C) + " not divisible by heads " +
                      std::to_string(heads));
  }
  g.win = window;
  g.heads = heads;
  g.dh = g.C / heads;
  g.nwy = g.H / window;
  g.nwx = g.W / window;
  g.NW = g.N * g.nwy * g.nwx;
  g.Tk = i64(window) * window;
  const i64 span = 2 * i64(window) - 1;
  for (const Var<T>* m : {&p.wq, &p.wk, &p.wv, &p.wo}) {
    if ((*m)->value.shape() != Shape{g.C, g.C}) throw ShapeError("window_msa: projections must be (C,C)");
  }
  for (const Var<T>* m : {&p.bq, &p.bk, &p.bv, &p.bo}) {
    if ((*m)->value.shape() != Shape{g.C}) throw ShapeError("window_msa: projection biases must be (C)");
  }
  if (p.bias_table->value.shape() != Shape{span * span, i64(heads)}) {
    throw ShapeError("window_msa: bias table must be (" + std::to_string(span * span) + "," +
                     std::to_string(heads) + ")");
  }

  // Relative-position bias row for each (query token, key token) pair.
  std::vector<i64> rel(g.Tk * g.Tk);
  for (i64 t = 0; t < g.Tk; ++t) {
    const i64 ty = t / window, tx = t % window;
    for (i64 u = 0; u < g.Tk; ++u) {
      const i64 uy = u / window, ux = u % window;
      rel[t * g.Tk + u] = (uy - ty + window - 1) * span + (ux - tx + window - 1);
    }
  }

  const i64 M = g.N * g.H * g.W;
  Tensor<T> qf({M, g.C}), kf({M, g.C}), vf({M, g.C});
  detail::matmul_bias(x->value.data(), p.wq->value.data(), p.bq->value.data(), qf.data(), M, g.C, g.C);
  detail::matmul_bias(x->value.data(), p.wk->value.data(), p.bk->value.data(), kf.data(), M, g.C, g.C);
  detail::matmul_bias(x->value.data(), p.wv->value.data(), p.bv->value.data(), vf.data(), M, g.C, g.C);
  Tensor<T> qw({g.NW, g.Tk, g.C}), kw({g.NW, g.Tk, g.C}), vw({g.NW, g.Tk, g.C});
  detail::win_gather(g, qf.data(), qw.data());
  detail::win_gather(g, kf.data(), kw.data());
  detail::win_gather(g, vf.data(), vw.data());

  const T att_scale = T(1) / std::sqrt(T(g.dh));
  Tensor<T> probs({g.NW, i64(heads), g.Tk, g.Tk});
  Tensor<T> ctxw({g.NW, g.Tk, g.C});
  const T* ptab = p.bias_table->value.data();
  std::vector<T> logits(g.Tk);
  for (i64 nw = 0; nw < g.NW; ++nw) {
    const T* qb = qw.data() + nw * g.Tk * g.C;
    const T* kb = kw.data() + nw * g.Tk * g.C;
    const T* vb = vw.data() + nw * g.Tk * g.C;
    T* cb = ctxw.data() + nw * g.Tk * g.C;
    for (i64 t = 0; t < g.Tk * g.C; ++t) cb[t] = T(0);
    for (i64 h = 0; h < heads; ++h) {
      const i64 hd0 = h * g.dh;
      T* pb = probs.data() + ((nw * heads + h) * g.Tk) * g.Tk;
      for (i64 t = 0; t < g.Tk; ++t) {
        T mx = -std::numeric_limits<T>::infinity();
        for (i64 u = 0; u < g.Tk; ++u) {
          const T* qrow = qb + t * g.C + hd0;
          const T* krow = kb + u * g.C + hd0;
          T dot = T(0);
          for (i64 d = 0; d < g.dh; ++d) dot += qrow[d] * krow[d];
          const T lg = dot * att_scale + ptab[rel[t * g.Tk + u] * heads + h];
          logits[u] = lg;
          if (lg > mx) mx = lg;
        }
        T denom = T(0);
        T* prow = pb + t * g.Tk;
        for (i64 u = 0; u < g.Tk; ++u) {
          const T e = std::exp(logits[u] - mx);
          prow[u] = e;
          denom += e;
        }
        for (i64 u = 0; u < g.Tk; ++u) prow[u] /= denom;
        T* crow = cb + t * g.C + hd0;
        for (i64 u = 0; u < g.Tk; ++u) {
          const T pv = prow[u];
          const T* vrow = vb + u * g.C + hd0;
          for (i64 d = 0; d < g.dh; ++d) crow[d] += pv * vrow[d];
        }
      }
    }
  }
  Tensor<T> ctxf({M, g.C});
  detail::win_scatter(g, ctxw.data(), ctxf.data());
  Tensor<T> yf({M, g.C});
  detail::matmul_bias(ctxf.data(), p.wo->value.data(), p.bo->value.data(), yf.data(), M, g.C, g.C);
  if (trace) trace->probs = probs;

  Tensor<T> out = yf.reshaped(x->value.shape());
  std::vector<Var<T>> parents{x, p.wq, p.bq, p.wk, p.bk, p.wv, p.bv, p.wo, p.bo, p.bias_table};
  auto pp = p;
  return make_op<T>(std::move(out), std::move(parents),
                    [x, pp, g, rel, att_scale, qw, kw, vw, probs, ctxf, M](Node<T>& n) {
    const i64 heads = g.heads;
    const Tensor<T> gy = n.grad.reshaped({M, g.C});
    // Output projection.
    if (pp.bo->requires_grad) detail::colsum_acc(gy.data(), pp.bo->ensure_grad().data(), M, g.C);
    if (pp.wo->requires_grad) {
      detail::atb_acc(ctxf.data(), gy.data(), pp.wo->ensure_grad().data(), M, g.C, g.C);
    }
    Tensor<T> gctxf({M, g.C});
    detail::matmul_bt_acc(gy.data(), pp.wo->value.data(), gctxf.data(), M, g.C, g.C);
    Tensor<T> gctxw({g.NW, g.Tk, g.C});
    detail::win_gather(g, gctxf.data(), gctxw.data());

    Tensor<T> gqw({g.NW, g.Tk, g.C}), gkw({g.NW, g.Tk, g.C}), gvw({g.NW, g.Tk, g.C});
    T* gtab = pp.bias_table->requires_grad ? pp.bias_table->ensure_grad().data() : nullptr;
    std::vector<T> gp(g.Tk), gl(g.Tk);
    for (i64 nw = 0; nw < g.NW; ++nw) {
      const T* qb = qw.data() + nw * g.Tk * g.C;
      const T* kb = kw.data() + nw * g.Tk * g.C;
      const T* vb = vw.data() + nw * g.Tk * g.C;
      const T* gcb = gctxw.data() + nw * g.Tk * g.C;
      T* gqb = gqw.data() + nw * g.Tk * g.C;
      T* gkb = gkw.data() + nw * g.Tk * g.C;
      T* gvb = gvw.data() + nw * g.Tk * g.C;
      for (i64 h = 0; h < heads; ++h) {
        const i64 hd0 = h * g.dh;
        const T* pb = probs.data() + ((nw * heads + h) * g.Tk) * g.Tk;
        for (i64 t = 0; t < g.Tk; ++t) {
          const T* prow = pb + t * g.Tk;
          const T* gcrow = gcb + t * g.C + hd0;
          // d(context)/d(probs) and the value gradient.
          T dot_pg = T(0);
          for (i64 u = 0; u < g.Tk; ++u) {
            const T* vrow = vb + u * g.C + hd0;
            T s = T(0);
            for (i64 d = 0; d < g.dh; ++d) s += gcrow[d] * vrow[d];
            gp[u] = s;
            dot_pg += s * prow[u];
            T* gvrow = gvb + u * g.C + hd0;
            const T pv = prow[u];
            for (i64 d = 0; d < g.dh; ++d) gvrow[d] += pv * gcrow[d];
          }
          // Softmax backward, then bias table and q/k gradients.
          T* gqrow = gqb + t * g.C + hd0;
          const T* qrow = qb + t * g.C + hd0;
          for (i64 u = 0; u < g.Tk; ++u) {
            const T glu = prow[u] * (gp[u] - dot_pg);
            gl[u] = glu;
            if (gtab) gtab[rel[t * g.Tk + u] * heads + h] += glu;
            const T* krow = kb + u * g.C + hd0;
            const T f = glu * att_scale;
            for (i64 d = 0; d < g.dh; ++d) gqrow[d] += f * krow[d];
            T* gkrow = gkb + u * g.C + hd0;
            for (i64 d = 0; d < g.dh; ++d) gkrow[d] += f * qrow[d];
          }
        }
      }
    }

    Tensor<T> gqf({M, g.C}), gkf({M, g.C}), gvf({M, g.C});
    detail::win_scatter(g, gqw.data(), gqf.data());
    detail::win_scatter(g, gkw.data(), gkf.data());
    detail::win_scatter(g, gvw.data(), gvf.data());
    const T* xflat = x->value.data();
    T* gx = x->requires_grad ? x->ensure_grad().data() : nullptr;
    struct Proj {
      const Tensor<T>* gf;
      Var<T> w, b;
    };
    const Proj projs[3] = {{&gqf, pp.wq, pp.bq}, {&gkf, pp.wk, pp.bk}, {&gvf, pp.wv, pp.bv}};
    for (const auto& pr : projs) {
      if (gx) detail::matmul_bt_acc(pr.gf->data(), pr.w->value.data(), gx, M, g.C, g.C);
      if (pr.w->requires_grad) detail::atb_acc(xflat, pr.gf->data(), pr.w->ensure_grad().data(), M, g.C, g.C);
      if (pr.b->requires_grad) detail::colsum_acc(pr.gf->data(), pr.b->ensure_grad().data(), M, g.C);
    }
  });
}

}  // namespace dtd

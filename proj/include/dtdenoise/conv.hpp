// Copyright (c) 2026 The dtdenoise Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <vector>

#include "dtdenoise/errors.hpp"
#include "dtdenoise/graph.hpp"
#include "dtdenoise/ops.hpp"
#include "dtdenoise/tensor.hpp"

// 2-D convolutions on NHWC tensors. Weights are laid out (kh, kw, Cin, Cout)
// and zero padding keeps the spatial size, so residual subtraction against
// the input always lines up. The deformable variant shifts every kernel tap
// by a learned (dy, dx) and samples bilinearly, reading 0 out of bounds.

namespace dtd {

namespace detail {

struct ConvGeom {
  i64 N, H, W, Cin, kh, kw, Cout, ph, pw;
};

template <typename T>
ConvGeom conv_geometry(const Tensor<T>& x, const Tensor<T>& w, const Var<T>& b, int stride) {
  if (stride != 1) throw ConfigError("conv2d: only stride 1 is supported");
  if (x.rank() != 4) throw ShapeError("conv2d: input must be NHWC, got " + shape_str(x.shape()));
  if (w.rank() != 4) throw ShapeError("conv2d: weights must be (kh,kw,Cin,Cout)");
  ConvGeom g{x.dim(0), x.dim(1), x.dim(2), x.dim(3), w.dim(0), w.dim(1), w.dim(3), 0, 0};
  if (w.dim(2) != g.Cin) {
    throw ShapeError("conv2d: weight Cin " + std::to_string(w.dim(2)) + " vs input Cin " +
                     std::to_string(g.Cin));
  }
  if (b && (b->value.rank() != 1 || b->value.dim(0) != g.Cout)) {
    throw ShapeError("conv2d: bad bias shape");
  }
  g.ph = (g.kh - 1) / 2;
  g.pw = (g.kw - 1) / 2;
  return g;
}

// Bilinear read of channel plane values at fractional (h, w); zero outside.
// Matches the usual deformable-convolution sampler: the four lattice
// corners are weighted by (1-frac) terms, with out-of-range corners giving 0.
template <typename T>
T bilinear_sample(const T* plane, i64 H, i64 W, i64 stride_c, T h, T w) {
  if (h <= T(-1) || h >= T(H) || w <= T(-1) || w >= T(W)) return T(0);
  const i64 h_low = static_cast<i64>(std::floor(h));
  const i64 w_low = static_cast<i64>(std::floor(w));
  const i64 h_high = h_low + 1;
  const i64 w_high = w_low + 1;
  const T lh = h - T(h_low);
  const T lw = w - T(w_low);
  const T hh = T(1) - lh, hw = T(1) - lw;
  T v1 = T(0), v2 = T(0), v3 = T(0), v4 = T(0);
  if (h_low >= 0 && w_low >= 0) v1 = plane[(h_low * W + w_low) * stride_c];
  if (h_low >= 0 && w_high <= W - 1) v2 = plane[(h_low * W + w_high) * stride_c];
  if (h_high <= H - 1 && w_low >= 0) v3 = plane[(h_high * W + w_low) * stride_c];
  if (h_high <= H - 1 && w_high <= W - 1) v4 = plane[(h_high * W + w_high) * stride_c];
  return hh * hw * v1 + hh * lw * v2 + lh * hw * v3 + lh * lw * v4;
}

}  // namespace detail

/// Plain 2-D convolution, stride 1, zero padding preserving H and W.
template <typename T>
Var<T> conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, int stride = 1) {
  const auto g = detail::conv_geometry(x->value, w->value, b, stride);
  Tensor<T> out({g.N, g.H, g.W, g.Cout});
  const T* px = x->value.data();
  const T* pw = w->value.data();
  const T* pb = b ? b->value.data() : nullptr;
  T* po = out.data();
  std::vector<T> acc(g.Cout);
  for (i64 n = 0; n < g.N; ++n) {
    for (i64 oh = 0; oh < g.H; ++oh) {
      for (i64 ow = 0; ow < g.W; ++ow) {
        for (i64 co = 0; co < g.Cout; ++co) acc[co] = pb ? pb[co] : T(0);
        for (i64 kh = 0; kh < g.kh; ++kh) {
          const i64 ih = oh + kh - g.ph;
          if (ih < 0 || ih >= g.H) continue;
          for (i64 kw = 0; kw < g.kw; ++kw) {
            const i64 iw = ow + kw - g.pw;
            if (iw < 0 || iw >= g.W) continue;
            const T* xrow = px + ((n * g.H + ih) * g.W + iw) * g.Cin;
            const T* wk = pw + (kh * g.kw + kw) * g.Cin * g.Cout;
            for (i64 ci = 0; ci < g.Cin; ++ci) {
              const T xv = xrow[ci];
              const T* wrow = wk + ci * g.Cout;
              for (i64 co = 0; co < g.Cout; ++co) acc[co] += xv * wrow[co];
            }
          }
        }
        T* orow = po + ((n * g.H + oh) * g.W + ow) * g.Cout;
        for (i64 co = 0; co < g.Cout; ++co) orow[co] = acc[co];
      }
    }
  }
  return make_op<T>(std::move(out), {x, w, b}, [x, w, b, g](Node<T>& n) {
    const T* gr = n.grad.data();
    const T* px = x->value.data();
    const T* pw = w->value.data();
    T* gx = x->requires_grad ? x->ensure_grad().data() : nullptr;
    T* gw = w->requires_grad ? w->ensure_grad().data() : nullptr;
    T* gb = b && b->requires_grad ? b->ensure_grad().data() : nullptr;
    for (i64 nn = 0; nn < g.N; ++nn) {
      for (i64 oh = 0; oh < g.H; ++oh) {
        for (i64 ow = 0; ow < g.W; ++ow) {
          const T* grow = gr + ((nn * g.H + oh) * g.W + ow) * g.Cout;
          if (gb) {
            for (i64 co = 0; co < g.Cout; ++co) gb[co] += grow[co];
          }
          for (i64 kh = 0; kh < g.kh; ++kh) {
            const i64 ih = oh + kh - g.ph;
            if (ih < 0 || ih >= g.H) continue;
            for (i64 kw = 0; kw < g.kw; ++kw) {
              const i64 iw = ow + kw - g.pw;
              if (iw < 0 || iw >= g.W) continue;
              const i64 xoff = ((nn * g.H + ih) * g.W + iw) * g.Cin;
              const T* wk = pw + (kh * g.kw + kw) * g.Cin * g.Cout;
              for (i64 ci = 0; ci < g.Cin; ++ci) {
                const T* wrow = wk + ci * g.Cout;
                if (gx) {
                  T a = T(0);
                  for (i64 co = 0; co < g.Cout; ++co) a += grow[co] * wrow[co];
                  gx[xoff + ci] += a;
                }
                if (gw) {
                  const T xv = px[xoff + ci];
                  T* gwrow = gw + ((kh * g.kw + kw) * g.Cin + ci) * g.Cout;
                  for (i64 co = 0; co < g.Cout; ++co) gwrow[co] += xv * grow[co];
                }
              }
            }
          }
        }
      }
    }
  });
}

/// Deformable 2-D convolution. `offsets` has shape (N, H, W, 2*kh*kw): for
/// output position (oh, ow) and tap t, entries 2t and 2t+1 hold (dy, dx)
/// added to the tap's lattice position. Sampling is bilinear with zeros
/// outside the image; all three inputs and the bias receive gradients.
template <typename T>
Var<T> deformable_conv2d(const Var<T>& x, const Var<T>& w, const Var<T>& b, const Var<T>& offsets,
                         int stride = 1) {
  const auto g = detail::conv_geometry(x->value, w->value, b, stride);
  const i64 taps = g.kh * g.kw;
  const Shape want{g.N, g.H, g.W, 2 * taps};
  if (offsets->value.shape() != want) {
    throw ShapeError("deformable_conv2d: offsets must be " + shape_str(want) + ", got " +
                     shape_str(offsets->value.shape()));
  }
  Tensor<T> out({g.N, g.H, g.W, g.Cout});
  const T* px = x->value.data();
  const T* pw = w->value.data();
  const T* pb = b ? b->value.data() : nullptr;
  const T* pof = offsets->value.data();
  T* po = out.data();
  std::vector<T> acc(g.Cout);
  for (i64 n = 0; n < g.N; ++n) {
    const T* xn = px + n * g.H * g.W * g.Cin;
    for (i64 oh = 0; oh < g.H; ++oh) {
      for (i64 ow = 0; ow < g.W; ++ow) {
        for (i64 co = 0; co < g.Cout; ++co) acc[co] = pb ? pb[co] : T(0);
        const T* orow = pof + ((n * g.H + oh) * g.W + ow) * 2 * taps;
        for (i64 kh = 0; kh < g.kh; ++kh) {
          for (i64 kw = 0; kw < g.kw; ++kw) {
            const i64 t = kh * g.kw + kw;
            const T sh = T(oh + kh - g.ph) + orow[2 * t];
            const T sw = T(ow + kw - g.pw) + orow[2 * t + 1];
            const T* wk = pw + t * g.Cin * g.Cout;
            for (i64 ci = 0; ci < g.Cin; ++ci) {
              const T v = detail::bilinear_sample(xn + ci, g.H, g.W, g.Cin, sh, sw);
              if (v == T(0)) continue;
              const T* wrow = wk + ci * g.Cout;
              for (i64 co = 0; co < g.Cout; ++co) acc[co] += v * wrow[co];
            }
          }
        }
        T* dst = po + ((n * g.H + oh) * g.W + ow) * g.Cout;
        for (i64 co = 0; co < g.Cout; ++co) dst[co] = acc[co];
      }
    }
  }
  return make_op<T>(std::move(out), {x, w, b, offsets}, [x, w, b, offsets, g, taps](Node<T>& n) {
    const T* gr = n.grad.data();
    const T* px = x->value.data();
    const T* pw = w->value.data();
    const T* pof = offsets->value.data();
    T* gx = x->requires_grad ? x->ensure_grad().data() : nullptr;
    T* gw = w->requires_grad ? w->ensure_grad().data() : nullptr;
    T* gb = b && b->requires_grad ? b->ensure_grad().data() : nullptr;
    T* gof = offsets->requires_grad ? offsets->ensure_grad().data() : nullptr;
    for (i64 nn = 0; nn < g.N; ++nn) {
      const T* xn = px + nn * g.H * g.W * g.Cin;
      T* gxn = gx ? gx + nn * g.H * g.W * g.Cin : nullptr;
      for (i64 oh = 0; oh < g.H; ++oh) {
        for (i64 ow = 0; ow < g.W; ++ow) {
          const i64 at = ((nn * g.H + oh) * g.W + ow);
          const T* grow = gr + at * g.Cout;
          if (gb) {
            for (i64 co = 0; co < g.Cout; ++co) gb[co] += grow[co];
          }
          const T* orow = pof + at * 2 * taps;
          for (i64 kh = 0; kh < g.kh; ++kh) {
            for (i64 kw = 0; kw < g.kw; ++kw) {
              const i64 t = kh * g.kw + kw;
              const T sh = T(oh + kh - g.ph) + orow[2 * t];
              const T sw = T(ow + kw - g.pw) + orow[2 * t + 1];
              if (sh <= T(-1) || sh >= T(g.H) || sw <= T(-1) || sw >= T(g.W)) continue;
              const i64 h_low = static_cast<i64>(std::floor(sh));
              const i64 w_low = static_cast<i64>(std::floor(sw));
              const i64 h_high = h_low + 1;
              const i64 w_high = w_low + 1;
              const T lh = sh - T(h_low), lw = sw - T(w_low);
              const T hh = T(1) - lh, hw = T(1) - lw;
              const bool c1 = h_low >= 0 && w_low >= 0;
              const bool c2 = h_low >= 0 && w_high <= g.W - 1;
              const bool c3 = h_high <= g.H - 1 && w_low >= 0;
              const bool c4 = h_high <= g.H - 1 && w_high <= g.W - 1;
              const T* wk = pw + t * g.Cin * g.Cout;
              T gdy = T(0), gdx = T(0);
              for (i64 ci = 0; ci < g.Cin; ++ci) {
                const T* wrow = wk + ci * g.Cout;
                // wg = d(out row) / d(sample value) folded with the
                // incoming gradient.
                T wg = T(0);
                for (i64 co = 0; co < g.Cout; ++co) wg += wrow[co] * grow[co];
                const T* plane = xn + ci;
                T v1 = T(0), v2 = T(0), v3 = T(0), v4 = T(0);
                if (c1) v1 = plane[(h_low * g.W + w_low) * g.Cin];
                if (c2) v2 = plane[(h_low * g.W + w_high) * g.Cin];
                if (c3) v3 = plane[(h_high * g.W + w_low) * g.Cin];
                if (c4) v4 = plane[(h_high * g.W + w_high) * g.Cin];
                if (gof) {
                  gdy += wg * (-hw * v1 - lw * v2 + hw * v3 + lw * v4);
                  gdx += wg * (-hh * v1 + hh * v2 - lh * v3 + lh * v4);
                }
                if (gw) {
                  const T v = hh * hw * v1 + hh * lw * v2 + lh * hw * v3 + lh * lw * v4;
                  T* gwrow = gw + (t * g.Cin + ci) * g.Cout;
                  for (i64 co = 0; co < g.Cout; ++co) gwrow[co] += v * grow[co];
                }
                if (gxn) {
                  T* gplane = gxn + ci;
                  if (c1) gplane[(h_low * g.W + w_low) * g.Cin] += hh * hw * wg;
                  if (c2) gplane[(h_low * g.W + w_high) * g.Cin] += hh * lw * wg;
                  if (c3) gplane[(h_high * g.W + w_low) * g.Cin] += lh * hw * wg;
                  if (c4) gplane[(h_high * g.W + w_high) * g.Cin] += lh * lw * wg;
                }
              }
              if (gof) {
                T* gorow = gof + at * 2 * taps;
                gorow[2 * t] += gdy;
                gorow[2 * t + 1] += gdx;
              }
            }
          }
        }
      }
    }
  });
}

}  // namespace dtd

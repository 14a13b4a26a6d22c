/*
 * Copyright 2026 the lu2net authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <optional>
#include <type_traits>

#include "lu2net/tensor.hpp"

namespace lu2net {

enum class ActivationKind { relu, sigmoid, tanh, identity };

inline const char* activation_name(ActivationKind k) {
  switch (k) {
    case ActivationKind::relu: return "relu";
    case ActivationKind::sigmoid: return "sigmoid";
    case ActivationKind::tanh: return "tanh";
    case ActivationKind::identity: return "identity";
  }
  return "?";
}

inline ActivationKind parse_activation(const std::string& s) {
  if (s == "relu") return ActivationKind::relu;
  if (s == "sigmoid") return ActivationKind::sigmoid;
  if (s == "tanh") return ActivationKind::tanh;
  if (s == "identity") return ActivationKind::identity;
  throw ConfigError(strcat_("unknown activation kind '", s, "'"));
}

/// Parameters of a 2-D cross-correlation with zero padding.
struct ConvSpec {
  int in_channels = 0;
  int out_channels = 0;
  int kernel_h = 1;
  int kernel_w = 1;
  int stride = 1;
  int padding = 0;
  bool has_bias = true;

  void validate() const {
    if (stride < 1) throw ConfigError(strcat_("conv stride must be >= 1, got ", stride));
    if (padding < 0) throw ConfigError(strcat_("conv padding must be >= 0, got ", padding));
    if (kernel_h < 1 || kernel_w < 1)
      throw ConfigError(strcat_("conv kernel dims must be >= 1, got ", kernel_h, "x", kernel_w));
    if (in_channels < 1 || out_channels < 1)
      throw ConfigError(strcat_("conv channel counts must be >= 1, got ", in_channels, "->", out_channels));
  }

  /// floor((extent + 2*padding - kernel)/stride) + 1; must be positive.
  Dims4 out_dims(const Dims4& in) const {
    const int oh = (in.h + 2 * padding - kernel_h) / stride + 1;
    const int ow = (in.w + 2 * padding - kernel_w) / stride + 1;
    if (in.h + 2 * padding < kernel_h || in.w + 2 * padding < kernel_w || oh <= 0 || ow <= 0)
      throw ConfigError(strcat_("conv output size is non-positive for input ", in.str(), " with kernel ",
                                kernel_h, "x", kernel_w, " stride ", stride, " padding ", padding));
    return Dims4{in.n, out_channels, oh, ow};
  }
};

namespace ops {

template <std::floating_point T>
void check_weights(const Tensor4<T>& w, const ConvSpec& spec) {
  if (w.n() != spec.out_channels || w.c() != spec.in_channels || w.h() != spec.kernel_h || w.w() != spec.kernel_w)
    throw ShapeError(strcat_("conv weights ", w.dims().str(), " do not match spec ", spec.out_channels, "x",
                             spec.in_channels, "x", spec.kernel_h, "x", spec.kernel_w));
}

template <std::floating_point T>
void check_bias(const Tensor4<T>* bias, int channels, const char* who) {
  if (!bias) return;
  if (bias->n() != 1 || bias->c() != channels || bias->h() != 1 || bias->w() != 1)
    throw ShapeError(strcat_(who, ": bias ", bias->dims().str(), " does not match 1x", channels, "x1x1"));
}

// ---------------------------------------------------------------------------
// conv2d: direct cross-correlation with zero padding.
// ---------------------------------------------------------------------------

template <std::floating_point T>
Tensor4<T> conv2d_fwd(const Tensor4<T>& x, const Tensor4<T>& w, const std::type_identity_t<Tensor4<T>>* bias,
                      const ConvSpec& spec) {
  spec.validate();
  if (x.c() != spec.in_channels)
    throw ShapeError(strcat_("conv2d: input ", x.dims().str(), " has ", x.c(), " channels, spec expects ",
                             spec.in_channels));
  check_weights(w, spec);
  check_bias(bias, spec.out_channels, "conv2d");

  const Dims4 od = spec.out_dims(x.dims());
  Tensor4<T> out(od);
  const int S = spec.stride, P = spec.padding;
  for (int n = 0; n < od.n; ++n) {
    parallel_for(od.c, [&](std::int64_t c0, std::int64_t c1) {
      for (int co = static_cast<int>(c0); co < static_cast<int>(c1); ++co) {
        T* oplane = out.plane(n, co);
        const T b = bias ? bias->at(0, co, 0, 0) : T{0};
        std::fill(oplane, oplane + std::int64_t{od.h} * od.w, b);
        for (int ci = 0; ci < spec.in_channels; ++ci) {
          for (int kh = 0; kh < spec.kernel_h; ++kh) {
            for (int oh = 0; oh < od.h; ++oh) {
              const int ih = oh * S - P + kh;
              if (ih < 0 || ih >= x.h()) continue;
              const T* xrow = x.row(n, ci, ih);
              T* orow = oplane + std::int64_t{oh} * od.w;
              for (int kw = 0; kw < spec.kernel_w; ++kw) {
                const T wv = w.at(co, ci, kh, kw);
                if (wv == T{0}) continue;
                const int off = kw - P;
                // ow range with 0 <= ow*S + off < W
                int lo = 0;
                if (off < 0) lo = (-off + S - 1) / S;
                int hi = od.w - 1;
                const int maxiw = x.w() - 1 - off;
                if (maxiw < 0) continue;
                hi = std::min(hi, maxiw / S);
                for (int ow = lo; ow <= hi; ++ow) orow[ow] += wv * xrow[ow * S + off];
              }
            }
          }
        }
      }
    });
  }
  return out;
}

template <std::floating_point T>
Tensor4<T> conv2d_bwd_input(const Tensor4<T>& g, const Tensor4<T>& w, const ConvSpec& spec, const Dims4& in_dims) {
  Tensor4<T> gx(in_dims);
  const int S = spec.stride, P = spec.padding;
  for (int n = 0; n < in_dims.n; ++n) {
    parallel_for(in_dims.c, [&](std::int64_t c0, std::int64_t c1) {
      for (int ci = static_cast<int>(c0); ci < static_cast<int>(c1); ++ci) {
        for (int co = 0; co < spec.out_channels; ++co) {
          for (int kh = 0; kh < spec.kernel_h; ++kh) {
            for (int oh = 0; oh < g.h(); ++oh) {
              const int ih = oh * S - P + kh;
              if (ih < 0 || ih >= in_dims.h) continue;
              const T* grow = g.row(n, co, oh);
              T* gxrow = gx.row(n, ci, ih);
              for (int kw = 0; kw < spec.kernel_w; ++kw) {
                const T wv = w.at(co, ci, kh, kw);
                if (wv == T{0}) continue;
                const int off = kw - P;
                int lo = 0;
                if (off < 0) lo = (-off + S - 1) / S;
                int hi = g.w() - 1;
                const int maxiw = in_dims.w - 1 - off;
                if (maxiw < 0) continue;
                hi = std::min(hi, maxiw / S);
                for (int ow = lo; ow <= hi; ++ow) gxrow[ow * S + off] += wv * grow[ow];
              }
            }
          }
        }
      }
    });
  }
  return gx;
}

template <std::floating_point T>
Tensor4<T> conv2d_bwd_weights(const Tensor4<T>& g, const Tensor4<T>& x, const ConvSpec& spec) {
  Tensor4<T> gw(Dims4{spec.out_channels, spec.in_channels, spec.kernel_h, spec.kernel_w});
  const int S = spec.stride, P = spec.padding;
  parallel_for(spec.out_channels, [&](std::int64_t c0, std::int64_t c1) {
    for (int co = static_cast<int>(c0); co < static_cast<int>(c1); ++co) {
      for (int ci = 0; ci < spec.in_channels; ++ci) {
        for (int kh = 0; kh < spec.kernel_h; ++kh) {
          for (int kw = 0; kw < spec.kernel_w; ++kw) {
            T acc = 0;
            for (int n = 0; n < g.n(); ++n) {
              for (int oh = 0; oh < g.h(); ++oh) {
                const int ih = oh * S - P + kh;
                if (ih < 0 || ih >= x.h()) continue;
                const T* grow = g.row(n, co, oh);
                const T* xrow = x.row(n, ci, ih);
                const int off = kw - P;
                int lo = 0;
                if (off < 0) lo = (-off + S - 1) / S;
                int hi = g.w() - 1;
                const int maxiw = x.w() - 1 - off;
                if (maxiw < 0) continue;
                hi = std::min(hi, maxiw / S);
                for (int ow = lo; ow <= hi; ++ow) acc += grow[ow] * xrow[ow * S + off];
              }
            }
            gw.at(co, ci, kh, kw) = acc;
          }
        }
      }
    }
  });
  return gw;
}

/// Sum of the gradient over batch and space, shaped 1xCx1x1.
template <std::floating_point T>
Tensor4<T> sum_bias_grad(const Tensor4<T>& g) {
  Tensor4<T> gb(Dims4{1, g.c(), 1, 1});
  for (int n = 0; n < g.n(); ++n)
    for (int c = 0; c < g.c(); ++c) {
      const T* p = g.plane(n, c);
      T acc = 0;
      for (std::int64_t i = 0; i < std::int64_t{g.h()} * g.w(); ++i) acc += p[i];
      gb.at(0, c, 0, 0) += acc;
    }
  return gb;
}

// ---------------------------------------------------------------------------
// Axial depthwise convolution: per channel, a horizontal 1xk and a vertical
// kx1 cross-correlation (zero padding (k-1)/2) plus the identity residual.
// Each output channel depends only on its own input channel.
// ---------------------------------------------------------------------------

template <std::floating_point T>
void check_axial_kernels(const Tensor4<T>& x, const Tensor4<T>& hk, const Tensor4<T>& vk) {
  const int k = hk.w();
  if (k % 2 == 0 || vk.h() % 2 == 0)
    throw ConfigError(strcat_("axial_depthwise: kernel length must be odd, got h=", k, " v=", vk.h()));
  if (hk.n() != x.c() || hk.c() != 1 || hk.h() != 1)
    throw ShapeError(strcat_("axial_depthwise: h kernels ", hk.dims().str(), " do not match input channels ",
                             x.c(), " (want ", x.c(), "x1x1xk)"));
  if (vk.n() != x.c() || vk.c() != 1 || vk.w() != 1)
    throw ShapeError(strcat_("axial_depthwise: v kernels ", vk.dims().str(), " do not match input channels ",
                             x.c(), " (want ", x.c(), "x1xkx1)"));
  if (vk.h() != k)
    throw ShapeError(strcat_("axial_depthwise: h kernel length ", k, " differs from v kernel length ", vk.h()));
}

template <std::floating_point T>
Tensor4<T> axial_depthwise_fwd(const Tensor4<T>& x, const Tensor4<T>& hk, const Tensor4<T>& vk) {
  check_axial_kernels(x, hk, vk);
  const int k = hk.w(), off = (k - 1) / 2;
  const int H = x.h(), W = x.w();
  Tensor4<T> out = x;  // identity residual
  for (int n = 0; n < x.n(); ++n) {
    parallel_for(x.c(), [&](std::int64_t c0, std::int64_t c1) {
      for (int c = static_cast<int>(c0); c < static_cast<int>(c1); ++c) {
        // horizontal pass
        for (int y = 0; y < H; ++y) {
          const T* xrow = x.row(n, c, y);
          T* orow = out.row(n, c, y);
          for (int t = 0; t < k; ++t) {
            const T wv = hk.at(c, 0, 0, t);
            if (wv == T{0}) continue;
            const int d = t - off;
            const int lo = std::max(0, -d), hi = std::min(W - 1, W - 1 - d);
            for (int xw = lo; xw <= hi; ++xw) orow[xw] += wv * xrow[xw + d];
          }
        }
        // vertical pass
        for (int t = 0; t < k; ++t) {
          const T wv = vk.at(c, 0, t, 0);
          if (wv == T{0}) continue;
          const int d = t - off;
          const int ylo = std::max(0, -d), yhi = std::min(H - 1, H - 1 - d);
          for (int y = ylo; y <= yhi; ++y) {
            const T* xrow = x.row(n, c, y + d);
            T* orow = out.row(n, c, y);
            for (int xw = 0; xw < W; ++xw) orow[xw] += wv * xrow[xw];
          }
        }
      }
    });
  }
  return out;
}

template <std::floating_point T>
Tensor4<T> axial_depthwise_bwd_input(const Tensor4<T>& g, const Tensor4<T>& hk, const Tensor4<T>& vk) {
  // Adjoint of a same-padded correlation is the correlation with the
  // reversed kernel under the same padding; the residual passes g through.
  const int k = hk.w(), off = (k - 1) / 2;
  const int H = g.h(), W = g.w();
  Tensor4<T> gx = g;
  for (int n = 0; n < g.n(); ++n) {
    parallel_for(g.c(), [&](std::int64_t c0, std::int64_t c1) {
      for (int c = static_cast<int>(c0); c < static_cast<int>(c1); ++c) {
        for (int y = 0; y < H; ++y) {
          const T* grow = g.row(n, c, y);
          T* gxrow = gx.row(n, c, y);
          for (int t = 0; t < k; ++t) {
            const T wv = hk.at(c, 0, 0, t);
            if (wv == T{0}) continue;
            const int d = off - t;  // reversed
            const int lo = std::max(0, -d), hi = std::min(W - 1, W - 1 - d);
            for (int xw = lo; xw <= hi; ++xw) gxrow[xw] += wv * grow[xw + d];
          }
        }
        for (int t = 0; t < k; ++t) {
          const T wv = vk.at(c, 0, t, 0);
          if (wv == T{0}) continue;
          const int d = off - t;
          const int ylo = std::max(0, -d), yhi = std::min(H - 1, H - 1 - d);
          for (int y = ylo; y <= yhi; ++y) {
            const T* grow = g.row(n, c, y + d);
            T* gxrow = gx.row(n, c, y);
            for (int xw = 0; xw < W; ++xw) gxrow[xw] += wv * grow[xw];
          }
        }
      }
    });
  }
  return gx;
}

template <std::floating_point T>
void axial_depthwise_bwd_kernels(const Tensor4<T>& g, const Tensor4<T>& x, const Tensor4<T>& hk,
                                 const Tensor4<T>& vk, Tensor4<T>& ghk, Tensor4<T>& gvk) {
  const int k = hk.w(), off = (k - 1) / 2;
  const int H = x.h(), W = x.w();
  ghk = Tensor4<T>(hk.dims());
  gvk = Tensor4<T>(vk.dims());
  for (int n = 0; n < x.n(); ++n) {
    parallel_for(x.c(), [&](std::int64_t c0, std::int64_t c1) {
      for (int c = static_cast<int>(c0); c < static_cast<int>(c1); ++c) {
        for (int t = 0; t < k; ++t) {
          const int d = t - off;
          T acch = 0;
          {
            const int lo = std::max(0, -d), hi = std::min(W - 1, W - 1 - d);
            for (int y = 0; y < H; ++y) {
              const T* grow = g.row(n, c, y);
              const T* xrow = x.row(n, c, y);
              for (int xw = lo; xw <= hi; ++xw) acch += grow[xw] * xrow[xw + d];
            }
          }
          ghk.at(c, 0, 0, t) += acch;
          T accv = 0;
          {
            const int ylo = std::max(0, -d), yhi = std::min(H - 1, H - 1 - d);
            for (int y = ylo; y <= yhi; ++y) {
              const T* grow = g.row(n, c, y);
              const T* xrow = x.row(n, c, y + d);
              for (int xw = 0; xw < W; ++xw) accv += grow[xw] * xrow[xw];
            }
          }
          gvk.at(c, 0, t, 0) += accv;
        }
      }
    });
  }
}

// ---------------------------------------------------------------------------
// Pointwise (1x1) convolution: per-pixel linear map across channels.
// ---------------------------------------------------------------------------

template <std::floating_point T>
void check_pointwise(const Tensor4<T>& x, const Tensor4<T>& w, const Tensor4<T>* bias) {
  if (w.h() != 1 || w.w() != 1)
    throw ShapeError(strcat_("pointwise: weights must be CoutxCinx1x1, got ", w.dims().str()));
  if (w.c() != x.c())
    throw ShapeError(strcat_("pointwise: weights ", w.dims().str(), " expect ", w.c(), " input channels, input is ",
                             x.dims().str()));
  check_bias(bias, w.n(), "pointwise");
}

template <std::floating_point T>
Tensor4<T> pointwise_fwd(const Tensor4<T>& x, const Tensor4<T>& w, const std::type_identity_t<Tensor4<T>>* bias) {
  check_pointwise(x, w, bias);
  const int Co = w.n(), Ci = x.c();
  const std::int64_t P = std::int64_t{x.h()} * x.w();
  Tensor4<T> out(Dims4{x.n(), Co, x.h(), x.w()});
  for (int n = 0; n < x.n(); ++n) {
    parallel_for(Co, [&](std::int64_t c0, std::int64_t c1) {
      for (int co = static_cast<int>(c0); co < static_cast<int>(c1); ++co) {
        T* op = out.plane(n, co);
        const T b = bias ? bias->at(0, co, 0, 0) : T{0};
        std::fill(op, op + P, b);
        for (int ci = 0; ci < Ci; ++ci) {
          const T wv = w.at(co, ci, 0, 0);
          if (wv == T{0}) continue;
          const T* xp = x.plane(n, ci);
          for (std::int64_t p = 0; p < P; ++p) op[p] += wv * xp[p];
        }
      }
    });
  }
  return out;
}

template <std::floating_point T>
Tensor4<T> pointwise_bwd_input(const Tensor4<T>& g, const Tensor4<T>& w) {
  const int Co = w.n(), Ci = w.c();
  const std::int64_t P = std::int64_t{g.h()} * g.w();
  Tensor4<T> gx(Dims4{g.n(), Ci, g.h(), g.w()});
  for (int n = 0; n < g.n(); ++n) {
    parallel_for(Ci, [&](std::int64_t c0, std::int64_t c1) {
      for (int ci = static_cast<int>(c0); ci < static_cast<int>(c1); ++ci) {
        T* gxp = gx.plane(n, ci);
        for (int co = 0; co < Co; ++co) {
          const T wv = w.at(co, ci, 0, 0);
          if (wv == T{0}) continue;
          const T* gp = g.plane(n, co);
          for (std::int64_t p = 0; p < P; ++p) gxp[p] += wv * gp[p];
        }
      }
    });
  }
  return gx;
}

template <std::floating_point T>
Tensor4<T> pointwise_bwd_weights(const Tensor4<T>& g, const Tensor4<T>& x) {
  const int Co = g.c(), Ci = x.c();
  const std::int64_t P = std::int64_t{g.h()} * g.w();
  Tensor4<T> gw(Dims4{Co, Ci, 1, 1});
  parallel_for(Co, [&](std::int64_t c0, std::int64_t c1) {
    for (int co = static_cast<int>(c0); co < static_cast<int>(c1); ++co) {
      for (int ci = 0; ci < Ci; ++ci) {
        T acc = 0;
        for (int n = 0; n < g.n(); ++n) {
          const T* gp = g.plane(n, co);
          const T* xp = x.plane(n, ci);
          for (std::int64_t p = 0; p < P; ++p) acc += gp[p] * xp[p];
        }
        gw.at(co, ci, 0, 0) = acc;
      }
    }
  });
  return gw;
}

// ---------------------------------------------------------------------------
// Global average pooling.
// ---------------------------------------------------------------------------

template <std::floating_point T>
Tensor4<T> global_avg_pool_fwd(const Tensor4<T>& x) {
  if (std::int64_t{x.h()} * x.w() < 1)
    throw ShapeError(strcat_("global_avg_pool: empty spatial extent in ", x.dims().str()));
  Tensor4<T> out(Dims4{x.n(), x.c(), 1, 1});
  const std::int64_t P = std::int64_t{x.h()} * x.w();
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c) {
      const T* p = x.plane(n, c);
      T acc = 0;
      for (std::int64_t i = 0; i < P; ++i) acc += p[i];
      out.at(n, c, 0, 0) = acc / static_cast<T>(P);
    }
  return out;
}

template <std::floating_point T>
Tensor4<T> global_avg_pool_bwd(const Tensor4<T>& g, const Dims4& in_dims) {
  Tensor4<T> gx(in_dims);
  const std::int64_t P = std::int64_t{in_dims.h} * in_dims.w;
  for (int n = 0; n < in_dims.n; ++n)
    for (int c = 0; c < in_dims.c; ++c) {
      const T v = g.at(n, c, 0, 0) / static_cast<T>(P);
      T* p = gx.plane(n, c);
      for (std::int64_t i = 0; i < P; ++i) p[i] = v;
    }
  return gx;
}

// ---------------------------------------------------------------------------
// 2x2 max pooling (stride 2) and x2 bilinear upsampling (corner-aligned).
// ---------------------------------------------------------------------------

template <std::floating_point T>
Tensor4<T> downsample_max2_fwd(const Tensor4<T>& x, std::vector<std::uint8_t>* argmax = nullptr) {
  if (x.h() % 2 != 0 || x.w() % 2 != 0)
    throw ShapeError(strcat_("downsample_max2 requires even H and W, got ", x.dims().str()));
  const int Ho = x.h() / 2, Wo = x.w() / 2;
  Tensor4<T> out(Dims4{x.n(), x.c(), Ho, Wo});
  if (argmax) argmax->assign(static_cast<std::size_t>(out.size()), 0);
  std::int64_t oi = 0;
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c)
      for (int oh = 0; oh < Ho; ++oh) {
        const T* r0 = x.row(n, c, 2 * oh);
        const T* r1 = x.row(n, c, 2 * oh + 1);
        T* orow = out.row(n, c, oh);
        for (int ow = 0; ow < Wo; ++ow, ++oi) {
          const T cand[4] = {r0[2 * ow], r0[2 * ow + 1], r1[2 * ow], r1[2 * ow + 1]};
          int best = 0;
          for (int j = 1; j < 4; ++j)
            if (cand[j] > cand[best]) best = j;  // first max wins ties
          orow[ow] = cand[best];
          if (argmax) (*argmax)[static_cast<std::size_t>(oi)] = static_cast<std::uint8_t>(best);
        }
      }
  return out;
}

template <std::floating_point T>
Tensor4<T> downsample_max2_bwd(const Tensor4<T>& g, const std::vector<std::uint8_t>& argmax, const Dims4& in_dims) {
  Tensor4<T> gx(in_dims);
  std::int64_t oi = 0;
  for (int n = 0; n < g.n(); ++n)
    for (int c = 0; c < g.c(); ++c)
      for (int oh = 0; oh < g.h(); ++oh)
        for (int ow = 0; ow < g.w(); ++ow, ++oi) {
          const int best = argmax[static_cast<std::size_t>(oi)];
          const int ih = 2 * oh + (best >> 1), iw = 2 * ow + (best & 1);
          gx.at(n, c, ih, iw) += g.at(n, c, oh, ow);
        }
  return gx;
}

struct LerpIndex {
  int i0, i1;
  double t;
};

inline std::vector<LerpIndex> corner_aligned_axis(int in, int out) {
  std::vector<LerpIndex> v(static_cast<std::size_t>(out));
  for (int i = 0; i < out; ++i) {
    double pos = 0.0;
    if (out > 1 && in > 1) pos = static_cast<double>(i) * (in - 1) / (out - 1);
    int i0 = static_cast<int>(pos);
    if (i0 > in - 1) i0 = in - 1;
    const double t = pos - i0;
    v[static_cast<std::size_t>(i)] = {i0, std::min(i0 + 1, in - 1), t};
  }
  return v;
}

template <std::floating_point T>
Tensor4<T> upsample_bilinear2_fwd(const Tensor4<T>& x) {
  const int Ho = x.h() * 2, Wo = x.w() * 2;
  if (x.h() < 1 || x.w() < 1)
    throw ShapeError(strcat_("upsample_bilinear2: empty spatial extent in ", x.dims().str()));
  const auto ys = corner_aligned_axis(x.h(), Ho);
  const auto xs = corner_aligned_axis(x.w(), Wo);
  Tensor4<T> out(Dims4{x.n(), x.c(), Ho, Wo});
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c)
      for (int oy = 0; oy < Ho; ++oy) {
        const auto& Y = ys[static_cast<std::size_t>(oy)];
        const T* r0 = x.row(n, c, Y.i0);
        const T* r1 = x.row(n, c, Y.i1);
        const T ty = static_cast<T>(Y.t);
        T* orow = out.row(n, c, oy);
        for (int ox = 0; ox < Wo; ++ox) {
          const auto& X = xs[static_cast<std::size_t>(ox)];
          const T tx = static_cast<T>(X.t);
          const T top = r0[X.i0] + tx * (r0[X.i1] - r0[X.i0]);
          const T bot = r1[X.i0] + tx * (r1[X.i1] - r1[X.i0]);
          orow[ox] = top + ty * (bot - top);
        }
      }
  return out;
}

template <std::floating_point T>
Tensor4<T> upsample_bilinear2_bwd(const Tensor4<T>& g, const Dims4& in_dims) {
  const auto ys = corner_aligned_axis(in_dims.h, g.h());
  const auto xs = corner_aligned_axis(in_dims.w, g.w());
  Tensor4<T> gx(in_dims);
  for (int n = 0; n < g.n(); ++n)
    for (int c = 0; c < g.c(); ++c)
      for (int oy = 0; oy < g.h(); ++oy) {
        const auto& Y = ys[static_cast<std::size_t>(oy)];
        const T ty = static_cast<T>(Y.t);
        const T* grow = g.row(n, c, oy);
        T* g0 = gx.row(n, c, Y.i0);
        T* g1 = gx.row(n, c, Y.i1);
        for (int ox = 0; ox < g.w(); ++ox) {
          const auto& X = xs[static_cast<std::size_t>(ox)];
          const T tx = static_cast<T>(X.t);
          const T gv = grow[ox];
          g0[X.i0] += (1 - ty) * (1 - tx) * gv;
          g0[X.i1] += (1 - ty) * tx * gv;
          g1[X.i0] += ty * (1 - tx) * gv;
          g1[X.i1] += ty * tx * gv;
        }
      }
  return gx;
}

// ---------------------------------------------------------------------------
// Channel concatenation and slicing.
// ---------------------------------------------------------------------------

template <std::floating_point T>
Tensor4<T> concat_channels_fwd(const Tensor4<T>& a, const Tensor4<T>& b) {
  if (a.n() != b.n() || a.h() != b.h() || a.w() != b.w())
    throw ShapeError(strcat_("concat_channels: batch/spatial mismatch ", a.dims().str(), " vs ", b.dims().str()));
  Tensor4<T> out(Dims4{a.n(), a.c() + b.c(), a.h(), a.w()});
  const std::int64_t P = std::int64_t{a.h()} * a.w();
  for (int n = 0; n < a.n(); ++n) {
    for (int c = 0; c < a.c(); ++c)
      std::memcpy(out.plane(n, c), a.plane(n, c), sizeof(T) * static_cast<std::size_t>(P));
    for (int c = 0; c < b.c(); ++c)
      std::memcpy(out.plane(n, a.c() + c), b.plane(n, c), sizeof(T) * static_cast<std::size_t>(P));
  }
  return out;
}

/// Contiguous copy of channels [c0, c1).
template <std::floating_point T>
Tensor4<T> slice_channels(const Tensor4<T>& x, int c0, int c1) {
  if (c0 < 0 || c1 < c0 || c1 > x.c())
    throw ShapeError(strcat_("slice_channels [", c0, ",", c1, ") out of range for ", x.dims().str()));
  Tensor4<T> out(Dims4{x.n(), c1 - c0, x.h(), x.w()});
  const std::int64_t P = std::int64_t{x.h()} * x.w();
  for (int n = 0; n < x.n(); ++n)
    for (int c = c0; c < c1; ++c)
      std::memcpy(out.plane(n, c - c0), x.plane(n, c), sizeof(T) * static_cast<std::size_t>(P));
  return out;
}

// ---------------------------------------------------------------------------
// Elementwise operations.
// ---------------------------------------------------------------------------

template <std::floating_point T>
Tensor4<T> activation_fwd(const Tensor4<T>& x, ActivationKind kind) {
  Tensor4<T> out(x.dims());
  const std::int64_t n = x.size();
  switch (kind) {
    case ActivationKind::relu:
      for (std::int64_t i = 0; i < n; ++i) out.data()[i] = x.data()[i] > T{0} ? x.data()[i] : T{0};
      break;
    case ActivationKind::sigmoid:
      for (std::int64_t i = 0; i < n; ++i) out.data()[i] = T{1} / (T{1} + std::exp(-x.data()[i]));
      break;
    case ActivationKind::tanh:
      for (std::int64_t i = 0; i < n; ++i) out.data()[i] = std::tanh(x.data()[i]);
      break;
    case ActivationKind::identity:
      out = x;
      break;
  }
  return out;
}

/// Backward from the saved *output* (for relu the x>0 mask equals out>0).
template <std::floating_point T>
Tensor4<T> activation_bwd(const Tensor4<T>& g, const Tensor4<T>& out, ActivationKind kind) {
  Tensor4<T> gx(g.dims());
  const std::int64_t n = g.size();
  switch (kind) {
    case ActivationKind::relu:
      for (std::int64_t i = 0; i < n; ++i) gx.data()[i] = out.data()[i] > T{0} ? g.data()[i] : T{0};
      break;
    case ActivationKind::sigmoid:
      for (std::int64_t i = 0; i < n; ++i) {
        const T s = out.data()[i];
        gx.data()[i] = g.data()[i] * s * (T{1} - s);
      }
      break;
    case ActivationKind::tanh:
      for (std::int64_t i = 0; i < n; ++i) {
        const T t = out.data()[i];
        gx.data()[i] = g.data()[i] * (T{1} - t * t);
      }
      break;
    case ActivationKind::identity:
      gx = g;
      break;
  }
  return gx;
}

template <std::floating_point T>
void check_same_dims(const Tensor4<T>& a, const Tensor4<T>& b, const char* who) {
  if (!(a.dims() == b.dims()))
    throw ShapeError(strcat_(who, ": shape mismatch ", a.dims().str(), " vs ", b.dims().str()));
}

template <std::floating_point T>
Tensor4<T> add_fwd(const Tensor4<T>& a, const Tensor4<T>& b) {
  check_same_dims(a, b, "add");
  Tensor4<T> out(a.dims());
  for (std::int64_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
  return out;
}

template <std::floating_point T>
Tensor4<T> sub_fwd(const Tensor4<T>& a, const Tensor4<T>& b) {
  check_same_dims(a, b, "sub");
  Tensor4<T> out(a.dims());
  for (std::int64_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] - b.data()[i];
  return out;
}

template <std::floating_point T>
Tensor4<T> mul_fwd(const Tensor4<T>& a, const Tensor4<T>& b) {
  check_same_dims(a, b, "mul");
  Tensor4<T> out(a.dims());
  for (std::int64_t i = 0; i < a.size(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
  return out;
}

/// a*x + b elementwise with scalar a, b.
template <std::floating_point T>
Tensor4<T> scalar_affine_fwd(const Tensor4<T>& x, T a, T b) {
  Tensor4<T> out(x.dims());
  for (std::int64_t i = 0; i < x.size(); ++i) out.data()[i] = a * x.data()[i] + b;
  return out;
}

/// Per-channel scalar multiply: out[n,c,...] = x[n,c,...] * scale[c].
template <std::floating_point T>
Tensor4<T> channel_scale_fwd(const Tensor4<T>& x, const std::vector<T>& scale) {
  if (static_cast<int>(scale.size()) != x.c())
    throw ShapeError(strcat_("channel_scale: ", scale.size(), " factors for ", x.c(), " channels"));
  Tensor4<T> out(x.dims());
  const std::int64_t P = std::int64_t{x.h()} * x.w();
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c) {
      const T s = scale[static_cast<std::size_t>(c)];
      const T* xp = x.plane(n, c);
      T* op = out.plane(n, c);
      for (std::int64_t i = 0; i < P; ++i) op[i] = s * xp[i];
    }
  return out;
}

/// out[n,c,h,w] = x[n,c,h,w] * w[n,c,0,0] (per-sample per-channel gate).
template <std::floating_point T>
Tensor4<T> bcast_mul_fwd(const Tensor4<T>& x, const Tensor4<T>& gate) {
  if (gate.n() != x.n() || gate.c() != x.c() || gate.h() != 1 || gate.w() != 1)
    throw ShapeError(strcat_("bcast_mul: gate ", gate.dims().str(), " does not match ", x.dims().str()));
  Tensor4<T> out(x.dims());
  const std::int64_t P = std::int64_t{x.h()} * x.w();
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c) {
      const T s = gate.at(n, c, 0, 0);
      const T* xp = x.plane(n, c);
      T* op = out.plane(n, c);
      for (std::int64_t i = 0; i < P; ++i) op[i] = s * xp[i];
    }
  return out;
}

template <std::floating_point T>
Tensor4<T> bcast_mul_bwd_gate(const Tensor4<T>& g, const Tensor4<T>& x) {
  Tensor4<T> gg(Dims4{x.n(), x.c(), 1, 1});
  const std::int64_t P = std::int64_t{x.h()} * x.w();
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c) {
      const T* gp = g.plane(n, c);
      const T* xp = x.plane(n, c);
      T acc = 0;
      for (std::int64_t i = 0; i < P; ++i) acc += gp[i] * xp[i];
      gg.at(n, c, 0, 0) = acc;
    }
  return gg;
}

/// Mean over every element, as a 1x1x1x1 tensor.
template <std::floating_point T>
Tensor4<T> mean_all_fwd(const Tensor4<T>& x) {
  if (x.size() == 0) throw ShapeError("mean_all: empty tensor");
  T acc = 0;
  for (std::int64_t i = 0; i < x.size(); ++i) acc += x.data()[i];
  Tensor4<T> out(Dims4{1, 1, 1, 1});
  out.data()[0] = acc / static_cast<T>(x.size());
  return out;
}

template <std::floating_point T>
Tensor4<T> sum_all_fwd(const Tensor4<T>& x) {
  T acc = 0;
  for (std::int64_t i = 0; i < x.size(); ++i) acc += x.data()[i];
  Tensor4<T> out(Dims4{1, 1, 1, 1});
  out.data()[0] = acc;
  return out;
}

/// Clamp to [0,1]; gradient passes inside the closed interval.
template <std::floating_point T>
Tensor4<T> clamp01_fwd(const Tensor4<T>& x) {
  Tensor4<T> out(x.dims());
  for (std::int64_t i = 0; i < x.size(); ++i) out.data()[i] = std::clamp(x.data()[i], T{0}, T{1});
  return out;
}

}  // namespace ops
}  // namespace lu2net

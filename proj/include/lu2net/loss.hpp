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

#include <memory>
#include <type_traits>
#include <optional>
#include <string>
#include <vector>

#include "lu2net/checkpoint.hpp"
#include "lu2net/color.hpp"
#include "lu2net/metrics.hpp"

namespace lu2net::ad {

/// 1 - mean windowed SSIM, as a single recorded operation with an analytic
/// vector-Jacobian product. The forward value shares metrics::ssim_mean, so
/// 1 - ssim_metric == ssim_loss holds bitwise under one configuration.
template <std::floating_point T>
Var<T> ssim_loss(Var<T> x, Var<T> y, const metrics::SsimParams& p = {}) {
  Tape<T>& tp = *x.tape;
  auto params = std::make_shared<metrics::SsimParams>(p);
  const double mean = metrics::ssim_mean(tp.value(x), tp.value(y), *params);
  Tensor4<T> out(Dims4{1, 1, 1, 1});
  out.data()[0] = T{1} - static_cast<T>(mean);
  const bool ng = tp.needs_grad(x) || tp.needs_grad(y);
  return tp.record(std::move(out), ng, [x, y, params](Tape<T>& t, const Tensor4<T>& g) {
    const Tensor4<T>& xv = t.value(x);
    const Tensor4<T>& yv = t.value(y);
    const auto f = metrics::detail::ssim_fields(xv, yv, *params);
    const auto wd = metrics::gaussian_window(params->window, params->sigma);
    std::vector<T> win(wd.size());
    for (std::size_t i = 0; i < wd.size(); ++i) win[i] = static_cast<T>(wd[i]);

    const T gscale = -g.data()[0] / static_cast<T>(f.smap.size());
    const T C1 = static_cast<T>(params->c1()), C2 = static_cast<T>(params->c2());
    Tensor4<T> dmx(f.mx.dims()), dmy(f.mx.dims()), du(f.mx.dims()), dw2(f.mx.dims()), dv(f.mx.dims());
    for (std::int64_t i = 0; i < f.mx.size(); ++i) {
      const T mx = f.mx.data()[i], my = f.my.data()[i];
      const T sxx = f.xx.data()[i] - mx * mx;
      const T syy = f.yy.data()[i] - my * my;
      const T sxy = f.xy.data()[i] - mx * my;
      const T a1 = 2 * mx * my + C1, a2 = 2 * sxy + C2;
      const T b1 = mx * mx + my * my + C1, b2 = sxx + syy + C2;
      const T D = b1 * b2;
      const T S = f.smap.data()[i];
      dmx.data()[i] = gscale * (2 * my * (a2 - a1) - S * 2 * mx * (b2 - b1)) / D;
      dmy.data()[i] = gscale * (2 * mx * (a2 - a1) - S * 2 * my * (b2 - b1)) / D;
      du.data()[i] = gscale * (-S / b2);
      dw2.data()[i] = gscale * (-S / b2);
      dv.data()[i] = gscale * (2 * a1 / D);
    }
    using metrics::detail::gauss_valid_adjoint;
    if (t.needs_grad(x)) {
      Tensor4<T> gx = gauss_valid_adjoint(dmx, win, xv.dims());
      Tensor4<T> gu = gauss_valid_adjoint(du, win, xv.dims());
      Tensor4<T> gv = gauss_valid_adjoint(dv, win, xv.dims());
      for (std::int64_t i = 0; i < gx.size(); ++i)
        gx.data()[i] += gu.data()[i] * 2 * xv.data()[i] + gv.data()[i] * yv.data()[i];
      t.accumulate(x, gx);
    }
    if (t.needs_grad(y)) {
      Tensor4<T> gy = gauss_valid_adjoint(dmy, win, yv.dims());
      Tensor4<T> gw = gauss_valid_adjoint(dw2, win, yv.dims());
      Tensor4<T> gv = gauss_valid_adjoint(dv, win, yv.dims());
      for (std::int64_t i = 0; i < gy.size(); ++i)
        gy.data()[i] += gw.data()[i] * 2 * yv.data()[i] + gv.data()[i] * xv.data()[i];
      t.accumulate(y, gy);
    }
  });
}

}  // namespace lu2net::ad

namespace lu2net::loss {

/// Term toggles, weights and constants of the composite objective. All
/// weights default to 1 (the objective is an unweighted sum); LAB/LCH
/// channel scales bring the terms to comparable magnitude.
struct LossConfig {
  bool use_rgb = true;
  bool use_lab = true;
  bool use_lch = true;
  bool use_ssim = true;
  bool use_vgg = false;

  double w_rgb = 1.0, w_lab = 1.0, w_lch = 1.0, w_ssim = 1.0, w_vgg = 1.0;

  double lab_scale_l = 1.0 / 100.0;
  double lab_scale_a = 1.0 / 128.0;
  double lab_scale_b = 1.0 / 128.0;
  double lch_scale_l = 1.0 / 100.0;
  double lch_scale_c = 1.0 / 128.0;
  double lch_scale_h = 1.0 / color::kPi;

  metrics::SsimParams ssim;

  std::string vgg_weights;       // extractor checkpoint path; empty = unset
  std::vector<int> vgg_layers;   // feature taps; empty = every layer

  void validate() const { ssim.validate(); }
};

/// Per-term values for one batch. Terms are reported unweighted times their
/// weight (i.e., exactly the contribution to total).
struct LossReport {
  double l_rgb = 0;
  double l_lab = 0;
  double l_lch = 0;
  double l_ssim = 0;
  double l_vgg = 0;
  bool has_vgg = false;
  double total = 0;

  double sum_of_terms() const { return l_rgb + l_lab + l_lch + l_ssim + (has_vgg ? l_vgg : 0.0); }
};

// ---------------------------------------------------------------------------
// Feature extractor for the perceptual term: a stack of zero-padded
// convolutions with relu, loaded from a checkpoint with layer{i}.weight /
// layer{i}.bias entries. Parameters never receive gradients.
// ---------------------------------------------------------------------------

template <std::floating_point T>
struct FeatureExtractor {
  struct Layer {
    Tensor4<T> w;  // Cout x Cin x kh x kw
    Tensor4<T> b;  // 1 x Cout x 1 x 1
  };
  std::vector<Layer> layers;
};

template <std::floating_point T>
FeatureExtractor<T> load_extractor(const std::string& path) {
  const auto entries = ckpt::read_checkpoint(path);
  FeatureExtractor<T> ext;
  for (int i = 0;; ++i) {
    const auto* we = ckpt::find_entry(entries, "layer" + std::to_string(i) + ".weight");
    if (!we) break;
    const auto* be = ckpt::find_entry(entries, "layer" + std::to_string(i) + ".bias");
    if (!be) throw IoError(strcat_(path, ": missing tensor 'layer", i, ".bias'"));
    if (we->dims.size() != 4) throw IoError(strcat_(path, ": layer", i, ".weight must be 4-d"));
    typename FeatureExtractor<T>::Layer layer;
    layer.w = Tensor4<T>(Dims4{static_cast<int>(we->dims[0]), static_cast<int>(we->dims[1]),
                               static_cast<int>(we->dims[2]), static_cast<int>(we->dims[3])});
    for (std::int64_t j = 0; j < layer.w.size(); ++j)
      layer.w.data()[j] = static_cast<T>(we->data[static_cast<std::size_t>(j)]);
    layer.b = Tensor4<T>(Dims4{1, static_cast<int>(we->dims[0]), 1, 1});
    if (be->element_count() != we->dims[0]) throw IoError(strcat_(path, ": layer", i, ".bias length mismatch"));
    for (std::int64_t j = 0; j < layer.b.size(); ++j)
      layer.b.data()[j] = static_cast<T>(be->data[static_cast<std::size_t>(j)]);
    ext.layers.push_back(std::move(layer));
  }
  if (ext.layers.empty()) throw IoError(strcat_(path, ": no layer0.weight found, not an extractor checkpoint"));
  return ext;
}

// ---------------------------------------------------------------------------
// Term builders on the tape. All take [0,1] tensors.
// ---------------------------------------------------------------------------

template <std::floating_point T>
ad::Var<T> mse_term(ad::Var<T> a, ad::Var<T> b) {
  auto d = ad::sub(a, b);
  return ad::mean_all(ad::mul(d, d));
}

template <std::floating_point T>
ad::Var<T> mse_rgb_term(ad::Var<T> a01, ad::Var<T> b01) {
  return mse_term(a01, b01);
}

template <std::floating_point T>
ad::Var<T> mse_lab_term(ad::Var<T> a01, ad::Var<T> b01, const LossConfig& cfg) {
  const std::vector<T> scale = {static_cast<T>(cfg.lab_scale_l), static_cast<T>(cfg.lab_scale_a),
                                static_cast<T>(cfg.lab_scale_b)};
  auto la = ad::channel_scale(ad::srgb_to_lab(a01), scale);
  auto lb = ad::channel_scale(ad::srgb_to_lab(b01), scale);
  return mse_term(la, lb);
}

/// L and C enter as scaled plain differences; the hue channel uses the
/// wrapped circular difference.
template <std::floating_point T>
ad::Var<T> mse_lch_term(ad::Var<T> a01, ad::Var<T> b01, const LossConfig& cfg) {
  auto pa = ad::lab_to_lch(ad::srgb_to_lab(a01));
  auto pb = ad::lab_to_lch(ad::srgb_to_lab(b01));
  const std::vector<T> lc_scale = {static_cast<T>(cfg.lch_scale_l), static_cast<T>(cfg.lch_scale_c), T{0}};
  const std::vector<T> h_scale = {T{0}, T{0}, static_cast<T>(cfg.lch_scale_h)};
  auto d_lc = ad::channel_scale(ad::sub(pa, pb), lc_scale);
  auto d_h = ad::channel_scale(ad::angle_diff(pa, pb), h_scale);
  auto d = ad::add(d_lc, d_h);
  return ad::mean_all(ad::mul(d, d));
}

template <std::floating_point T>
ad::Var<T> ssim_loss_term(ad::Var<T> a01, ad::Var<T> b01, const LossConfig& cfg) {
  return ad::ssim_loss(a01, b01, cfg.ssim);
}

/// Mean over the selected feature taps of the feature-map MSE.
template <std::floating_point T>
ad::Var<T> perceptual_term(ad::Var<T> a01, ad::Var<T> b01, const FeatureExtractor<T>& ext,
                           const std::vector<int>& taps) {
  ad::Tape<T>& tape = *a01.tape;
  std::vector<int> selected = taps;
  if (selected.empty())
    for (int i = 0; i < static_cast<int>(ext.layers.size()); ++i) selected.push_back(i);
  for (int tap : selected)
    if (tap < 0 || tap >= static_cast<int>(ext.layers.size()))
      throw ConfigError(strcat_("perceptual tap ", tap, " out of range; extractor has ", ext.layers.size(),
                                " layers"));

  auto features = [&](ad::Var<T> x) {
    std::vector<ad::Var<T>> feats;
    ad::Var<T> cur = x;
    for (const auto& layer : ext.layers) {
      ConvSpec spec{layer.w.c(), layer.w.n(), layer.w.h(), layer.w.w(), 1, (layer.w.h() - 1) / 2, true};
      cur = ad::relu(ad::conv2d(cur, tape.constant(layer.w), std::optional(tape.constant(layer.b)), spec));
      feats.push_back(cur);
    }
    return feats;
  };
  auto fa = features(a01);
  auto fb = features(b01);
  ad::Var<T> acc;
  for (std::size_t i = 0; i < selected.size(); ++i) {
    auto term = mse_term(fa[static_cast<std::size_t>(selected[i])], fb[static_cast<std::size_t>(selected[i])]);
    acc = i == 0 ? term : ad::add(acc, term);
  }
  return ad::scalar_affine(acc, static_cast<T>(1.0 / selected.size()), T{0});
}

// ---------------------------------------------------------------------------
// The composite objective. Inputs are network-range [-1,1] tensors;
// denormalization to [0,1] (with clamping) happens here.
// ---------------------------------------------------------------------------

template <std::floating_point T>
struct TotalLoss {
  LossReport report;
  ad::Var<T> total;
};

template <std::floating_point T>
TotalLoss<T> total_loss(ad::Var<T> pred_pm1, ad::Var<T> target_pm1, const LossConfig& cfg,
                        const std::type_identity_t<FeatureExtractor<T>>* extractor = nullptr) {
  cfg.validate();
  ad::Tape<T>& tape = *pred_pm1.tape;
  if (cfg.use_vgg && !extractor)
    throw ConfigError(
        "perceptual term is enabled but no extractor is loaded; point loss.vgg_weights at an extractor "
        "checkpoint (layer{i}.weight/.bias entries) or disable the term");

  auto a01 = ad::clamp01(ad::scalar_affine(pred_pm1, T{0.5}, T{0.5}));
  auto b01 = ad::clamp01(ad::scalar_affine(target_pm1, T{0.5}, T{0.5}));

  TotalLoss<T> out;
  std::optional<ad::Var<T>> total;
  auto push = [&](ad::Var<T> term, double weight, double& slot) {
    auto weighted = ad::scalar_affine(term, static_cast<T>(weight), T{0});
    slot = static_cast<double>(tape.value(weighted).data()[0]);
    total = total ? ad::add(*total, weighted) : weighted;
  };

  if (cfg.use_rgb) push(mse_rgb_term(a01, b01), cfg.w_rgb, out.report.l_rgb);
  if (cfg.use_lab) push(mse_lab_term(a01, b01, cfg), cfg.w_lab, out.report.l_lab);
  if (cfg.use_lch) push(mse_lch_term(a01, b01, cfg), cfg.w_lch, out.report.l_lch);
  if (cfg.use_ssim) push(ssim_loss_term(a01, b01, cfg), cfg.w_ssim, out.report.l_ssim);
  if (cfg.use_vgg) {
    push(perceptual_term(a01, b01, *extractor, cfg.vgg_layers), cfg.w_vgg, out.report.l_vgg);
    out.report.has_vgg = true;
  }
  if (!total) throw ConfigError("no loss terms enabled");
  out.total = *total;
  out.report.total = static_cast<double>(tape.value(*total).data()[0]);
  return out;
}

// Plain value wrappers (single definitions live on the tape path).

template <std::floating_point T>
double mse_rgb(const Tensor4<T>& a01, const Tensor4<T>& b01) {
  ad::Tape<T> t;
  return static_cast<double>(t.value(mse_rgb_term(t.constant(a01), t.constant(b01))).data()[0]);
}

template <std::floating_point T>
double mse_lab(const Tensor4<T>& a01, const Tensor4<T>& b01, const LossConfig& cfg = {}) {
  ad::Tape<T> t;
  return static_cast<double>(t.value(mse_lab_term(t.constant(a01), t.constant(b01), cfg)).data()[0]);
}

template <std::floating_point T>
double mse_lch(const Tensor4<T>& a01, const Tensor4<T>& b01, const LossConfig& cfg = {}) {
  ad::Tape<T> t;
  return static_cast<double>(t.value(mse_lch_term(t.constant(a01), t.constant(b01), cfg)).data()[0]);
}

template <std::floating_point T>
double ssim_loss_value(const Tensor4<T>& a01, const Tensor4<T>& b01, const metrics::SsimParams& p = {}) {
  return 1.0 - metrics::ssim_mean(a01, b01, p);
}

template <std::floating_point T>
double perceptual_loss(const Tensor4<T>& a01, const Tensor4<T>& b01, const FeatureExtractor<T>& ext,
                       const std::vector<int>& taps = {}) {
  ad::Tape<T> t;
  return static_cast<double>(t.value(perceptual_term(t.constant(a01), t.constant(b01), ext, taps)).data()[0]);
}

}  // namespace lu2net::loss

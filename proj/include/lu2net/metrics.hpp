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
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "lu2net/color.hpp"
#include "lu2net/tensor.hpp"

namespace lu2net::metrics {

/// PSNR of two [0,1] images in dB. Identical images return the 100 dB cap
/// so records stay finite and sortable.
inline constexpr double kPsnrCap = 100.0;

template <std::floating_point T>
double psnr(const Tensor4<T>& pred, const Tensor4<T>& ref) {
  ops::check_same_dims(pred, ref, "psnr");
  if (pred.size() == 0) throw ShapeError("psnr: empty tensors");
  double mse = 0;
  for (std::int64_t i = 0; i < pred.size(); ++i) {
    const double d = static_cast<double>(pred.data()[i]) - static_cast<double>(ref.data()[i]);
    mse += d * d;
  }
  mse /= static_cast<double>(pred.size());
  if (mse <= 0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

// ---------------------------------------------------------------------------
// Windowed SSIM. Gaussian window (normalized, separable), valid region only,
// per channel, averaged over batch/channels/pixels. This single routine is
// the definition shared by the metric and (through 1 - value) the loss.
// ---------------------------------------------------------------------------

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;

  void validate() const {
    if (window < 1 || window % 2 == 0) throw ConfigError(strcat_("ssim: window must be odd >= 1, got ", window));
    if (!(sigma > 0)) throw ConfigError("ssim: sigma must be positive");
  }

  double c1() const { return (k1 * dynamic_range) * (k1 * dynamic_range); }
  double c2() const { return (k2 * dynamic_range) * (k2 * dynamic_range); }
};

inline std::vector<double> gaussian_window(int window, double sigma) {
  std::vector<double> w(static_cast<std::size_t>(window));
  const double mid = (window - 1) / 2.0;
  double sum = 0;
  for (int i = 0; i < window; ++i) {
    const double d = i - mid;
    w[static_cast<std::size_t>(i)] = std::exp(-d * d / (2.0 * sigma * sigma));
    sum += w[static_cast<std::size_t>(i)];
  }
  for (auto& v : w) v /= sum;
  return w;
}

namespace detail {

/// Valid-mode separable correlation of every channel plane with the window:
/// rows first, then columns. Output is (H-win+1) x (W-win+1).
template <std::floating_point T>
Tensor4<T> gauss_valid(const Tensor4<T>& x, const std::vector<T>& win) {
  const int k = static_cast<int>(win.size());
  const int Ho = x.h() - k + 1, Wo = x.w() - k + 1;
  Tensor4<T> tmp(Dims4{x.n(), x.c(), x.h(), Wo});
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c)
      for (int y = 0; y < x.h(); ++y) {
        const T* xrow = x.row(n, c, y);
        T* trow = tmp.row(n, c, y);
        for (int ox = 0; ox < Wo; ++ox) {
          T acc = 0;
          for (int t = 0; t < k; ++t) acc += win[static_cast<std::size_t>(t)] * xrow[ox + t];
          trow[ox] = acc;
        }
      }
  Tensor4<T> out(Dims4{x.n(), x.c(), Ho, Wo});
  for (int n = 0; n < x.n(); ++n)
    for (int c = 0; c < x.c(); ++c)
      for (int oy = 0; oy < Ho; ++oy) {
        T* orow = out.row(n, c, oy);
        for (int ox = 0; ox < Wo; ++ox) orow[ox] = 0;
        for (int t = 0; t < k; ++t) {
          const T wv = win[static_cast<std::size_t>(t)];
          const T* trow = tmp.row(n, c, oy + t);
          for (int ox = 0; ox < Wo; ++ox) orow[ox] += wv * trow[ox];
        }
      }
  return out;
}

/// Adjoint of gauss_valid: scatters a valid-size field back to input size
/// (columns first, then rows, reversing the forward order).
template <std::floating_point T>
Tensor4<T> gauss_valid_adjoint(const Tensor4<T>& g, const std::vector<T>& win, const Dims4& in_dims) {
  const int k = static_cast<int>(win.size());
  const int Ho = g.h(), Wo = g.w();
  Tensor4<T> tmp(Dims4{in_dims.n, in_dims.c, in_dims.h, Wo});
  for (int n = 0; n < g.n(); ++n)
    for (int c = 0; c < g.c(); ++c)
      for (int oy = 0; oy < Ho; ++oy) {
        const T* grow = g.row(n, c, oy);
        for (int t = 0; t < k; ++t) {
          const T wv = win[static_cast<std::size_t>(t)];
          T* trow = tmp.row(n, c, oy + t);
          for (int ox = 0; ox < Wo; ++ox) trow[ox] += wv * grow[ox];
        }
      }
  Tensor4<T> out(in_dims);
  for (int n = 0; n < g.n(); ++n)
    for (int c = 0; c < g.c(); ++c)
      for (int y = 0; y < in_dims.h; ++y) {
        const T* trow = tmp.row(n, c, y);
        T* orow = out.row(n, c, y);
        for (int ox = 0; ox < Wo; ++ox) {
          const T gv = trow[ox];
          if (gv == T{0}) continue;
          for (int t = 0; t < k; ++t) orow[ox + t] += win[static_cast<std::size_t>(t)] * gv;
        }
      }
  return out;
}

template <std::floating_point T>
struct SsimFields {
  Tensor4<T> mx, my, xx, yy, xy;  // windowed means of x, y, x^2, y^2, xy
  Tensor4<T> smap;                // per-pixel SSIM over the valid region
  double mean = 0;
};

template <std::floating_point T>
SsimFields<T> ssim_fields(const Tensor4<T>& x, const Tensor4<T>& y, const SsimParams& p) {
  ops::check_same_dims(x, y, "ssim");
  p.validate();
  if (x.h() < p.window || x.w() < p.window)
    throw ConfigError(strcat_("ssim: image ", x.dims().str(), " smaller than the ", p.window, "x", p.window,
                              " window"));
  const auto wd = gaussian_window(p.window, p.sigma);
  std::vector<T> win(wd.size());
  for (std::size_t i = 0; i < wd.size(); ++i) win[i] = static_cast<T>(wd[i]);

  SsimFields<T> f;
  f.mx = gauss_valid(x, win);
  f.my = gauss_valid(y, win);
  f.xx = gauss_valid(ops::mul_fwd(x, x), win);
  f.yy = gauss_valid(ops::mul_fwd(y, y), win);
  f.xy = gauss_valid(ops::mul_fwd(x, y), win);

  const T C1 = static_cast<T>(p.c1()), C2 = static_cast<T>(p.c2());
  f.smap = Tensor4<T>(f.mx.dims());
  double total = 0;
  for (std::int64_t i = 0; i < f.mx.size(); ++i) {
    const T mx = f.mx.data()[i], my = f.my.data()[i];
    const T sxx = f.xx.data()[i] - mx * mx;
    const T syy = f.yy.data()[i] - my * my;
    const T sxy = f.xy.data()[i] - mx * my;
    const T a1 = 2 * mx * my + C1, a2 = 2 * sxy + C2;
    const T b1 = mx * mx + my * my + C1, b2 = sxx + syy + C2;
    const T s = (a1 * a2) / (b1 * b2);
    f.smap.data()[i] = s;
    total += static_cast<double>(s);
  }
  f.mean = total / static_cast<double>(f.smap.size());
  return f;
}

}  // namespace detail

/// Mean windowed SSIM of two [0,1] tensors over the valid region.
template <std::floating_point T>
double ssim_mean(const Tensor4<T>& x, const Tensor4<T>& y, const SsimParams& p = {}) {
  return detail::ssim_fields(x, y, p).mean;
}

// ---------------------------------------------------------------------------
// UCIQE: c1 * sigma_chroma + c2 * contrast_L + c3 * mean_saturation, computed
// in CIELAB with L and C in /100-normalized units so the three terms share a
// scale. Contrast is the 1st..99th percentile spread of L. Two saturation
// variants exist in the wild; both are available.
// ---------------------------------------------------------------------------

enum class SaturationVariant {
  chroma_over_norm,  // C / sqrt(C^2 + L^2)   (default)
  chroma_over_l,     // C / L
};

struct UciqeParams {
  double c1 = 0.4680;
  double c2 = 0.2745;
  double c3 = 0.2576;
  double lo_percentile = 0.01;
  double hi_percentile = 0.99;
  SaturationVariant saturation = SaturationVariant::chroma_over_norm;
};

/// Linear-interpolated percentile of a sorted vector, q in [0,1].
inline double percentile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) throw ShapeError("percentile of empty data");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const std::size_t i0 = static_cast<std::size_t>(pos);
  const std::size_t i1 = std::min(i0 + 1, sorted.size() - 1);
  const double t = pos - static_cast<double>(i0);
  return sorted[i0] + t * (sorted[i1] - sorted[i0]);
}

template <std::floating_point T>
double uciqe(const Tensor4<T>& img01, const UciqeParams& p = {}) {
  if (img01.c() != 3) throw ShapeError(strcat_("uciqe: need a 3-channel image, got ", img01.dims().str()));
  const std::int64_t P = std::int64_t{img01.h()} * img01.w();
  if (P == 0 || img01.n() != 1) throw ShapeError(strcat_("uciqe: need one non-empty image, got ", img01.dims().str()));

  std::vector<double> lvals(static_cast<std::size_t>(P));
  double chroma_sum = 0, chroma_sq_sum = 0, sat_sum = 0;
  const T* r = img01.plane(0, 0);
  const T* g = img01.plane(0, 1);
  const T* b = img01.plane(0, 2);
  for (std::int64_t i = 0; i < P; ++i) {
    const color::Vec3 lab = color::srgb_to_lab_pixel(r[i], g[i], b[i]);
    const double L = lab.x;
    const double C = std::sqrt(lab.y * lab.y + lab.z * lab.z);
    lvals[static_cast<std::size_t>(i)] = L / 100.0;
    const double Cn = C / 100.0;
    chroma_sum += Cn;
    chroma_sq_sum += Cn * Cn;
    double sat = 0;
    if (p.saturation == SaturationVariant::chroma_over_norm) {
      const double denom = std::sqrt(C * C + L * L);
      sat = denom > 1e-12 ? C / denom : 0.0;
    } else {
      sat = L > 1e-12 ? std::min(1.0, C / L) : 0.0;
    }
    sat_sum += sat;
  }
  const double np = static_cast<double>(P);
  const double mean_c = chroma_sum / np;
  const double var_c = std::max(0.0, chroma_sq_sum / np - mean_c * mean_c);
  const double sigma_c = std::sqrt(var_c);
  std::sort(lvals.begin(), lvals.end());
  const double contrast = percentile_sorted(lvals, p.hi_percentile) - percentile_sorted(lvals, p.lo_percentile);
  const double mean_sat = sat_sum / np;
  return p.c1 * sigma_c + p.c2 * contrast + p.c3 * mean_sat;
}

// ---------------------------------------------------------------------------
// Per-image records and the CSV emitted by evaluation runs.
// ---------------------------------------------------------------------------

struct MetricRecord {
  std::string id;
  double psnr = 0;
  double ssim = 0;
  double uciqe = 0;
};

inline void write_metrics_csv(std::ostream& os, const std::vector<MetricRecord>& records) {
  os << "id,psnr,ssim,uciqe\n";
  double sp = 0, ss = 0, su = 0;
  for (const auto& r : records) {
    os << r.id << "," << r.psnr << "," << r.ssim << "," << r.uciqe << "\n";
    sp += r.psnr;
    ss += r.ssim;
    su += r.uciqe;
  }
  if (!records.empty()) {
    const double n = static_cast<double>(records.size());
    os << "mean," << sp / n << "," << ss / n << "," << su / n << "\n";
  }
}

inline void write_metrics_csv(const std::string& path, const std::vector<MetricRecord>& records) {
  std::ofstream f(path);
  if (!f) throw IoError(strcat_("cannot open ", path, " for writing"));
  write_metrics_csv(f, records);
}

}  // namespace lu2net::metrics

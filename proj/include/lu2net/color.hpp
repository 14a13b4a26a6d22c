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

#include <array>
#include <cmath>

#include "lu2net/tape.hpp"

namespace lu2net::color {

// Standard sRGB <-> XYZ (D65) matrices at full derivation precision.
// The white point is defined as the matrix row sums and the inverse is the
// computed matrix inverse, so (1,1,1) maps to LAB (100,0,0) and the gray
// axis has zero chromaticity to machine precision instead of the ~1e-6
// residue the 7-digit rounded constants leave. Conversions run in double
// regardless of the tensor precision; each pixel is independent.

inline constexpr double kRgbToXyz[3][3] = {
    {0.41239079926595934, 0.35758433938387796, 0.18048078840183429},
    {0.21263900587151027, 0.71516867876775593, 0.07219231536073371},
    {0.01933081871559182, 0.11919477979462598, 0.95053215224966058},
};

inline constexpr double kXn = kRgbToXyz[0][0] + kRgbToXyz[0][1] + kRgbToXyz[0][2];
inline constexpr double kYn = kRgbToXyz[1][0] + kRgbToXyz[1][1] + kRgbToXyz[1][2];
inline constexpr double kZn = kRgbToXyz[2][0] + kRgbToXyz[2][1] + kRgbToXyz[2][2];

namespace detail {

struct Mat3 {
  double m[3][3];
};

constexpr Mat3 invert3(const double a[3][3]) {
  const double det = a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) -
                     a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0]) +
                     a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0]);
  Mat3 r{};
  r.m[0][0] = (a[1][1] * a[2][2] - a[1][2] * a[2][1]) / det;
  r.m[0][1] = (a[0][2] * a[2][1] - a[0][1] * a[2][2]) / det;
  r.m[0][2] = (a[0][1] * a[1][2] - a[0][2] * a[1][1]) / det;
  r.m[1][0] = (a[1][2] * a[2][0] - a[1][0] * a[2][2]) / det;
  r.m[1][1] = (a[0][0] * a[2][2] - a[0][2] * a[2][0]) / det;
  r.m[1][2] = (a[0][2] * a[1][0] - a[0][0] * a[1][2]) / det;
  r.m[2][0] = (a[1][0] * a[2][1] - a[1][1] * a[2][0]) / det;
  r.m[2][1] = (a[0][1] * a[2][0] - a[0][0] * a[2][1]) / det;
  r.m[2][2] = (a[0][0] * a[1][1] - a[0][1] * a[1][0]) / det;
  return r;
}

inline constexpr Mat3 kXyzToRgbMat = invert3(kRgbToXyz);

}  // namespace detail

inline constexpr auto& kXyzToRgb = detail::kXyzToRgbMat.m;

inline constexpr double kPi = 3.14159265358979323846;

/// Chroma below this is treated as achromatic: hue is 0 with zero gradient.
inline constexpr double kEpsChroma = 1e-6;

// sRGB gamma expansion and its derivative. The breakpoint uses the
// right-hand derivative.
inline double gamma_expand(double s) {
  return s <= 0.04045 ? s / 12.92 : std::pow((s + 0.055) / 1.055, 2.4);
}

inline double gamma_expand_deriv(double s) {
  return s < 0.04045 ? 1.0 / 12.92 : (2.4 / 1.055) * std::pow((s + 0.055) / 1.055, 1.4);
}

inline double gamma_compress(double l) {
  return l <= 0.0031308 ? 12.92 * l : 1.055 * std::pow(l, 1.0 / 2.4) - 0.055;
}

// CIELAB f(t) and its derivative; cube-root branch above (6/29)^3.
inline constexpr double kLabDelta = 6.0 / 29.0;
inline constexpr double kLabDelta3 = kLabDelta * kLabDelta * kLabDelta;

inline double lab_f(double t) {
  return t > kLabDelta3 ? std::cbrt(t) : t / (3.0 * kLabDelta * kLabDelta) + 4.0 / 29.0;
}

inline double lab_f_deriv(double t) {
  if (t <= kLabDelta3) return 1.0 / (3.0 * kLabDelta * kLabDelta);
  const double c = std::cbrt(t);
  return 1.0 / (3.0 * c * c);
}

inline double lab_f_inv(double f) {
  return f > kLabDelta ? f * f * f : 3.0 * kLabDelta * kLabDelta * (f - 4.0 / 29.0);
}

struct Vec3 {
  double x, y, z;
};

/// sRGB in [0,1] (clamped here) -> CIELAB (L in [0,100]).
inline Vec3 srgb_to_lab_pixel(double r, double g, double b) {
  r = std::clamp(r, 0.0, 1.0);
  g = std::clamp(g, 0.0, 1.0);
  b = std::clamp(b, 0.0, 1.0);
  const double lin[3] = {gamma_expand(r), gamma_expand(g), gamma_expand(b)};
  double xyz[3];
  for (int i = 0; i < 3; ++i)
    xyz[i] = kRgbToXyz[i][0] * lin[0] + kRgbToXyz[i][1] * lin[1] + kRgbToXyz[i][2] * lin[2];
  const double fx = lab_f(xyz[0] / kXn), fy = lab_f(xyz[1] / kYn), fz = lab_f(xyz[2] / kZn);
  return {116.0 * fy - 16.0, 500.0 * (fx - fy), 200.0 * (fy - fz)};
}

/// Jacobian d(L,a,b)/d(r,g,b) at an interior point (one-sided at kinks).
inline void srgb_to_lab_jacobian(double r, double g, double b, double J[3][3]) {
  const double s[3] = {std::clamp(r, 0.0, 1.0), std::clamp(g, 0.0, 1.0), std::clamp(b, 0.0, 1.0)};
  double lin[3], dlin[3];
  for (int i = 0; i < 3; ++i) {
    lin[i] = gamma_expand(s[i]);
    dlin[i] = gamma_expand_deriv(s[i]);
  }
  double xyz[3];
  for (int i = 0; i < 3; ++i)
    xyz[i] = kRgbToXyz[i][0] * lin[0] + kRgbToXyz[i][1] * lin[1] + kRgbToXyz[i][2] * lin[2];
  const double wn[3] = {kXn, kYn, kZn};
  // df[i]/dlin[j]
  double dfd[3][3];
  for (int i = 0; i < 3; ++i) {
    const double fp = lab_f_deriv(xyz[i] / wn[i]) / wn[i];
    for (int j = 0; j < 3; ++j) dfd[i][j] = fp * kRgbToXyz[i][j] * dlin[j];
  }
  for (int j = 0; j < 3; ++j) {
    J[0][j] = 116.0 * dfd[1][j];
    J[1][j] = 500.0 * (dfd[0][j] - dfd[1][j]);
    J[2][j] = 200.0 * (dfd[1][j] - dfd[2][j]);
  }
}

/// CIELAB -> sRGB. Out-of-gamut components are clamped to [0,1];
/// *out_of_gamut is set when clamping changed a value by more than eps.
inline Vec3 lab_to_srgb_pixel(double L, double a, double b, bool* out_of_gamut = nullptr) {
  const double fy = (L + 16.0) / 116.0;
  const double fx = fy + a / 500.0;
  const double fz = fy - b / 200.0;
  const double xyz[3] = {kXn * lab_f_inv(fx), kYn * lab_f_inv(fy), kZn * lab_f_inv(fz)};
  double rgb[3];
  bool oog = false;
  for (int i = 0; i < 3; ++i) {
    const double lin = kXyzToRgb[i][0] * xyz[0] + kXyzToRgb[i][1] * xyz[1] + kXyzToRgb[i][2] * xyz[2];
    double v = gamma_compress(lin);
    if (v < -1e-9 || v > 1.0 + 1e-9) oog = true;
    rgb[i] = std::clamp(v, 0.0, 1.0);
  }
  if (out_of_gamut) *out_of_gamut = oog;
  return {rgb[0], rgb[1], rgb[2]};
}

/// LAB -> LCH: L passes through, C = hypot(a,b), H = atan2(b,a).
/// Below kEpsChroma the hue is defined as 0.
inline Vec3 lab_to_lch_pixel(double L, double a, double b) {
  const double C = std::sqrt(a * a + b * b);
  const double H = C < kEpsChroma ? 0.0 : std::atan2(b, a);
  return {L, C, H};
}

/// dC/da, dC/db, dH/da, dH/db with the achromatic guard (zero gradients
/// below kEpsChroma, where hue is pinned to 0).
inline void lab_to_lch_jacobian(double a, double b, double& dCda, double& dCdb, double& dHda, double& dHdb) {
  const double C2 = a * a + b * b;
  const double C = std::sqrt(C2);
  if (C < kEpsChroma) {
    dCda = dCdb = dHda = dHdb = 0.0;
    return;
  }
  dCda = a / C;
  dCdb = b / C;
  dHda = -b / C2;
  dHdb = a / C2;
}

/// Circular distance between two hues in (-pi, pi]: min(|d|, 2pi-|d|).
inline double hue_distance(double h1, double h2) {
  double d = std::abs(h1 - h2);
  if (d > 2.0 * kPi) d = std::fmod(d, 2.0 * kPi);
  return std::min(d, 2.0 * kPi - d);
}

// ---------------------------------------------------------------------------
// Tagged tensor wrapper and whole-tensor conversions.
// ---------------------------------------------------------------------------

enum class Space { srgb01, lab, lch };

inline const char* space_name(Space s) {
  switch (s) {
    case Space::srgb01: return "srgb01";
    case Space::lab: return "lab";
    case Space::lch: return "lch";
  }
  return "?";
}

template <std::floating_point T>
struct ColorTensor {
  Tensor4<T> data;
  Space space = Space::srgb01;
};

template <std::floating_point T>
void require_space(const ColorTensor<T>& t, Space want, const char* who) {
  if (t.space != want)
    throw ConfigError(strcat_(who, ": expected a ", space_name(want), " tensor, got ", space_name(t.space)));
  if (t.data.c() != 3) throw ShapeError(strcat_(who, ": color tensors need C==3, got ", t.data.dims().str()));
}

template <std::floating_point T>
Tensor4<T> srgb_to_lab_tensor(const Tensor4<T>& x) {
  if (x.c() != 3) throw ShapeError(strcat_("srgb_to_lab: C must be 3, got ", x.dims().str()));
  Tensor4<T> out(x.dims());
  const std::int64_t P = std::int64_t{x.h()} * x.w();
  for (int n = 0; n < x.n(); ++n) {
    const T* r = x.plane(n, 0);
    const T* g = x.plane(n, 1);
    const T* b = x.plane(n, 2);
    T* L = out.plane(n, 0);
    T* A = out.plane(n, 1);
    T* B = out.plane(n, 2);
    for (std::int64_t i = 0; i < P; ++i) {
      const Vec3 lab = srgb_to_lab_pixel(r[i], g[i], b[i]);
      L[i] = static_cast<T>(lab.x);
      A[i] = static_cast<T>(lab.y);
      B[i] = static_cast<T>(lab.z);
    }
  }
  return out;
}

template <std::floating_point T>
ColorTensor<T> srgb_to_lab(const ColorTensor<T>& x) {
  require_space(x, Space::srgb01, "srgb_to_lab");
  return {srgb_to_lab_tensor(x.data), Space::lab};
}

template <std::floating_point T>
ColorTensor<T> lab_to_srgb(const ColorTensor<T>& x, bool* any_out_of_gamut = nullptr) {
  require_space(x, Space::lab, "lab_to_srgb");
  Tensor4<T> out(x.data.dims());
  bool oog_any = false;
  const std::int64_t P = std::int64_t{x.data.h()} * x.data.w();
  for (int n = 0; n < x.data.n(); ++n) {
    const T* L = x.data.plane(n, 0);
    const T* A = x.data.plane(n, 1);
    const T* B = x.data.plane(n, 2);
    T* r = out.plane(n, 0);
    T* g = out.plane(n, 1);
    T* b = out.plane(n, 2);
    for (std::int64_t i = 0; i < P; ++i) {
      bool oog = false;
      const Vec3 rgb = lab_to_srgb_pixel(L[i], A[i], B[i], &oog);
      oog_any |= oog;
      r[i] = static_cast<T>(rgb.x);
      g[i] = static_cast<T>(rgb.y);
      b[i] = static_cast<T>(rgb.z);
    }
  }
  if (any_out_of_gamut) *any_out_of_gamut = oog_any;
  return {std::move(out), Space::srgb01};
}

template <std::floating_point T>
Tensor4<T> lab_to_lch_tensor(const Tensor4<T>& x) {
  if (x.c() != 3) throw ShapeError(strcat_("lab_to_lch: C must be 3, got ", x.dims().str()));
  Tensor4<T> out(x.dims());
  const std::int64_t P = std::int64_t{x.h()} * x.w();
  for (int n = 0; n < x.n(); ++n) {
    const T* L = x.plane(n, 0);
    const T* A = x.plane(n, 1);
    const T* B = x.plane(n, 2);
    T* lo = out.plane(n, 0);
    T* co = out.plane(n, 1);
    T* ho = out.plane(n, 2);
    for (std::int64_t i = 0; i < P; ++i) {
      const Vec3 lch = lab_to_lch_pixel(L[i], A[i], B[i]);
      lo[i] = static_cast<T>(lch.x);
      co[i] = static_cast<T>(lch.y);
      ho[i] = static_cast<T>(lch.z);
    }
  }
  return out;
}

template <std::floating_point T>
ColorTensor<T> lab_to_lch(const ColorTensor<T>& x) {
  require_space(x, Space::lab, "lab_to_lch");
  return {lab_to_lch_tensor(x.data), Space::lch};
}

}  // namespace lu2net::color

namespace lu2net::ad {

/// Recorded sRGB->LAB conversion (expects clamped [0,1] input).
template <std::floating_point T>
Var<T> srgb_to_lab(Var<T> x) {
  Tape<T>& tp = *x.tape;
  Tensor4<T> out = color::srgb_to_lab_tensor(tp.value(x));
  return tp.record(std::move(out), tp.needs_grad(x), [x](Tape<T>& t, const Tensor4<T>& g) {
    const Tensor4<T>& xv = t.value(x);
    Tensor4<T> gx(xv.dims());
    const std::int64_t P = std::int64_t{xv.h()} * xv.w();
    for (int n = 0; n < xv.n(); ++n) {
      const T* r = xv.plane(n, 0);
      const T* gr = xv.plane(n, 1);
      const T* b = xv.plane(n, 2);
      const T* gL = g.plane(n, 0);
      const T* gA = g.plane(n, 1);
      const T* gB = g.plane(n, 2);
      T* o0 = gx.plane(n, 0);
      T* o1 = gx.plane(n, 1);
      T* o2 = gx.plane(n, 2);
      double J[3][3];
      for (std::int64_t i = 0; i < P; ++i) {
        color::srgb_to_lab_jacobian(r[i], gr[i], b[i], J);
        const double gl = gL[i], ga = gA[i], gb = gB[i];
        o0[i] = static_cast<T>(gl * J[0][0] + ga * J[1][0] + gb * J[2][0]);
        o1[i] = static_cast<T>(gl * J[0][1] + ga * J[1][1] + gb * J[2][1]);
        o2[i] = static_cast<T>(gl * J[0][2] + ga * J[1][2] + gb * J[2][2]);
      }
    }
    t.accumulate(x, gx);
  });
}

/// Recorded LAB->LCH conversion with the achromatic hue guard.
template <std::floating_point T>
Var<T> lab_to_lch(Var<T> x) {
  Tape<T>& tp = *x.tape;
  Tensor4<T> out = color::lab_to_lch_tensor(tp.value(x));
  return tp.record(std::move(out), tp.needs_grad(x), [x](Tape<T>& t, const Tensor4<T>& g) {
    const Tensor4<T>& xv = t.value(x);
    Tensor4<T> gx(xv.dims());
    const std::int64_t P = std::int64_t{xv.h()} * xv.w();
    for (int n = 0; n < xv.n(); ++n) {
      const T* A = xv.plane(n, 1);
      const T* B = xv.plane(n, 2);
      const T* gL = g.plane(n, 0);
      const T* gC = g.plane(n, 1);
      const T* gH = g.plane(n, 2);
      T* oL = gx.plane(n, 0);
      T* oA = gx.plane(n, 1);
      T* oB = gx.plane(n, 2);
      for (std::int64_t i = 0; i < P; ++i) {
        double dCda, dCdb, dHda, dHdb;
        color::lab_to_lch_jacobian(A[i], B[i], dCda, dCdb, dHda, dHdb);
        oL[i] = gL[i];
        oA[i] = static_cast<T>(gC[i] * dCda + gH[i] * dHda);
        oB[i] = static_cast<T>(gC[i] * dCdb + gH[i] * dHdb);
      }
    }
    t.accumulate(x, gx);
  });
}

}  // namespace lu2net::ad

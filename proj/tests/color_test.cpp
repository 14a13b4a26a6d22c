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

#include <gtest/gtest.h>

#include "lu2net/color.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

using namespace lu2net;

namespace {

Tensor4<double> single_pixel(double r, double g, double b) {
  Tensor4<double> t(1, 3, 1, 1);
  t.at(0, 0, 0, 0) = r;
  t.at(0, 1, 0, 0) = g;
  t.at(0, 2, 0, 0) = b;
  return t;
}

TEST(SrgbToLab, WhiteBlackAnchors) {
  auto white = color::srgb_to_lab_pixel(1, 1, 1);
  EXPECT_NEAR(white.x, 100.0, 1e-3);
  EXPECT_NEAR(white.y, 0.0, 1e-3);
  EXPECT_NEAR(white.z, 0.0, 1e-3);
  auto black = color::srgb_to_lab_pixel(0, 0, 0);
  EXPECT_NEAR(black.x, 0.0, 1e-12);
  EXPECT_NEAR(black.y, 0.0, 1e-12);
  EXPECT_NEAR(black.z, 0.0, 1e-12);
}

TEST(SrgbToLab, MidGrayMatchesIndependentColorimetry) {
  auto mid = color::srgb_to_lab_pixel(0.5, 0.5, 0.5);
  EXPECT_NEAR(mid.y, 0.0, 1e-9);
  EXPECT_NEAR(mid.z, 0.0, 1e-9);
  double L, A, B;
  oracle::srgb_to_lab_ref(0.5, 0.5, 0.5, L, A, B);
  // the oracle carries the 7-digit published matrix; agreement to ~1e-4
  EXPECT_NEAR(mid.x, L, 5e-4);
  auto c = color::srgb_to_lab_pixel(0.8, 0.3, 0.6);
  oracle::srgb_to_lab_ref(0.8, 0.3, 0.6, L, A, B);
  EXPECT_NEAR(c.x, L, 5e-3);
  EXPECT_NEAR(c.y, A, 5e-3);
  EXPECT_NEAR(c.z, B, 5e-3);
}

TEST(SrgbToLab, GrayAxisHasZeroChromaticity) {
  for (double g = 0.0; g <= 1.0; g += 0.05) {
    auto lab = color::srgb_to_lab_pixel(g, g, g);
    EXPECT_NEAR(lab.y, 0.0, 1e-9) << g;
    EXPECT_NEAR(lab.z, 0.0, 1e-9) << g;
  }
}

TEST(SrgbToLab, LStrictlyIncreasesAlongGrayAxis) {
  double prev = -1;
  for (double g = 0.0; g <= 1.0; g += 0.01) {
    const double L = color::srgb_to_lab_pixel(g, g, g).x;
    EXPECT_GT(L, prev) << g;
    prev = L;
  }
}

TEST(SrgbToLab, WrongTagIsUsageError) {
  color::ColorTensor<double> t{single_pixel(0.5, 0.5, 0.5), color::Space::lab};
  EXPECT_THROW(color::srgb_to_lab(t), ConfigError);
}

TEST(LabToSrgb, RoundTripPureRed) {
  color::ColorTensor<double> rgb{single_pixel(1, 0, 0), color::Space::srgb01};
  auto lab = color::srgb_to_lab(rgb);
  auto back = color::lab_to_srgb(lab);
  EXPECT_NEAR(back.data.at(0, 0, 0, 0), 1.0, 1e-5);
  EXPECT_NEAR(back.data.at(0, 1, 0, 0), 0.0, 1e-5);
  EXPECT_NEAR(back.data.at(0, 2, 0, 0), 0.0, 1e-5);
}

TEST(LabToSrgb, LabWhiteMapsToRgbOnes) {
  Tensor4<double> lab(1, 3, 1, 1);
  lab.at(0, 0, 0, 0) = 100.0;
  auto rgb = color::lab_to_srgb(color::ColorTensor<double>{lab, color::Space::lab});
  EXPECT_NEAR(rgb.data.at(0, 0, 0, 0), 1.0, 1e-5);
  EXPECT_NEAR(rgb.data.at(0, 1, 0, 0), 1.0, 1e-5);
  EXPECT_NEAR(rgb.data.at(0, 2, 0, 0), 1.0, 1e-5);
}

TEST(LabToSrgb, RoundTrip1000RandomColorsUnder1e5) {
  SplitMix64 rng(40);
  Tensor4<double> batch(1, 3, 10, 100);
  fill_uniform(batch, rng, 0.0, 1.0);
  color::ColorTensor<double> rgb{batch, color::Space::srgb01};
  auto back = color::lab_to_srgb(color::srgb_to_lab(rgb));
  EXPECT_LT(max_abs_diff(back.data, batch), 1e-5);

  // float storage keeps the same bound (conversion math runs in double)
  auto batchf = batch.cast<float>();
  color::ColorTensor<float> rgbf{batchf, color::Space::srgb01};
  auto backf = color::lab_to_srgb(color::srgb_to_lab(rgbf));
  EXPECT_LT(max_abs_diff(backf.data, batchf), 1e-5f);
}

TEST(LabToSrgb, OutOfGamutIsClampedAndFlagged) {
  Tensor4<double> lab(1, 3, 1, 1);
  lab.at(0, 0, 0, 0) = 50.0;
  lab.at(0, 1, 0, 0) = 120.0;  // far outside the sRGB gamut
  lab.at(0, 2, 0, 0) = -120.0;
  bool flagged = false;
  auto rgb = color::lab_to_srgb(color::ColorTensor<double>{lab, color::Space::lab}, &flagged);
  EXPECT_TRUE(flagged);
  for (std::int64_t i = 0; i < rgb.data.size(); ++i) {
    EXPECT_GE(rgb.data.data()[i], 0.0);
    EXPECT_LE(rgb.data.data()[i], 1.0);
  }
  bool in_gamut_flagged = true;
  color::ColorTensor<double> gray{single_pixel(0.5, 0.5, 0.5), color::Space::srgb01};
  color::lab_to_srgb(color::srgb_to_lab(gray), &in_gamut_flagged);
  EXPECT_FALSE(in_gamut_flagged);
}

TEST(LabToLch, PythagoreanValues) {
  auto lch = color::lab_to_lch_pixel(50.0, 3.0, 4.0);
  EXPECT_DOUBLE_EQ(lch.x, 50.0);
  EXPECT_DOUBLE_EQ(lch.y, 5.0);
  EXPECT_DOUBLE_EQ(lch.z, std::atan2(4.0, 3.0));
}

TEST(LabToLch, AchromaticGuardPinsHueToZero) {
  auto lch = color::lab_to_lch_pixel(30.0, 0.0, 0.0);
  EXPECT_DOUBLE_EQ(lch.y, 0.0);
  EXPECT_DOUBLE_EQ(lch.z, 0.0);
  double dCda, dCdb, dHda, dHdb;
  color::lab_to_lch_jacobian(0.0, 0.0, dCda, dCdb, dHda, dHdb);
  EXPECT_EQ(dCda, 0.0);
  EXPECT_EQ(dHda, 0.0);
  EXPECT_EQ(dHdb, 0.0);
}

TEST(LabToLch, ChromaGradientAt34) {
  double dCda, dCdb, dHda, dHdb;
  color::lab_to_lch_jacobian(3.0, 4.0, dCda, dCdb, dHda, dHdb);
  EXPECT_NEAR(dCda, 0.6, 1e-12);
  EXPECT_NEAR(dCdb, 0.8, 1e-12);
  // central finite differences on chroma
  const double h = 1e-6;
  auto C = [](double a, double b) { return std::sqrt(a * a + b * b); };
  EXPECT_NEAR((C(3 + h, 4) - C(3 - h, 4)) / (2 * h), dCda, 1e-6);
  EXPECT_NEAR((C(3, 4 + h) - C(3, 4 - h)) / (2 * h), dCdb, 1e-6);
}

TEST(LabToLch, ChromaIsNonnegative) {
  SplitMix64 rng(41);
  for (int i = 0; i < 200; ++i) {
    const double a = rng.next_uniform(-100, 100), b = rng.next_uniform(-100, 100);
    EXPECT_GE(color::lab_to_lch_pixel(50, a, b).y, 0.0);
  }
}

TEST(HueDistance, AnchorsAndWraparound) {
  EXPECT_DOUBLE_EQ(color::hue_distance(0.0, 0.0), 0.0);
  EXPECT_NEAR(color::hue_distance(color::kPi - 0.1, -color::kPi + 0.1), 0.2, 1e-12);
}

TEST(HueDistance, SymmetricBoundedTriangle) {
  SplitMix64 rng(42);
  for (int i = 0; i < 500; ++i) {
    const double a = rng.next_uniform(-color::kPi, color::kPi);
    const double b = rng.next_uniform(-color::kPi, color::kPi);
    const double c = rng.next_uniform(-color::kPi, color::kPi);
    const double dab = color::hue_distance(a, b);
    EXPECT_GE(dab, 0.0);
    EXPECT_LE(dab, color::kPi);
    EXPECT_DOUBLE_EQ(dab, color::hue_distance(b, a));
    EXPECT_LE(color::hue_distance(a, c), dab + color::hue_distance(b, c) + 1e-12);
  }
}

TEST(ColorTensors, GrayAxisChromaZeroThroughTensors) {
  auto g = Tensor4<double>::full({1, 3, 4, 4}, 0.42);
  auto lab = color::srgb_to_lab_tensor(g);
  auto lch = color::lab_to_lch_tensor(lab);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      EXPECT_NEAR(lab.at(0, 1, y, x), 0.0, 1e-9);
      EXPECT_NEAR(lab.at(0, 2, y, x), 0.0, 1e-9);
      EXPECT_NEAR(lch.at(0, 1, y, x), 0.0, 1e-9);
    }
}

}  // namespace

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

#include "lu2net/ops.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

using namespace lu2net;
using testutil::random_tensor;

namespace {

TEST(Tensor4, DataLengthMatchesDims) {
  Tensor4<float> t(2, 3, 4, 5);
  EXPECT_EQ(t.size(), 2 * 3 * 4 * 5);
  EXPECT_EQ(t.dims().str(), "2x3x4x5");
  EXPECT_THROW(Tensor4<float>(Dims4{1, 1, 2, 2}, std::vector<float>(3)), ShapeError);
}

TEST(Tensor4, ZeroChannelTensorsAreValid) {
  Tensor4<float> t(1, 0, 4, 4);
  EXPECT_EQ(t.size(), 0);
  EXPECT_TRUE(t.empty());
}

TEST(Tensor4, IndexingIsRowMajorWFastest) {
  Tensor4<double> t(1, 2, 2, 3);
  for (std::int64_t i = 0; i < t.size(); ++i) t.data()[i] = static_cast<double>(i);
  EXPECT_EQ(t.at(0, 0, 0, 1), 1.0);
  EXPECT_EQ(t.at(0, 0, 1, 0), 3.0);
  EXPECT_EQ(t.at(0, 1, 0, 0), 6.0);
}

// --- conv2d ---------------------------------------------------------------

TEST(Conv2d, IdentityKernelPreservesInput) {
  Tensor4<float> x(1, 1, 3, 3);
  SplitMix64 rng(1);
  fill_uniform(x, rng, -1, 1);
  Tensor4<float> w(1, 1, 3, 3);
  w.at(0, 0, 1, 1) = 1.0f;
  ConvSpec spec{1, 1, 3, 3, 1, 1, false};
  auto out = ops::conv2d_fwd(x, w, nullptr, spec);
  EXPECT_TRUE(bitwise_equal(out, x));
}

TEST(Conv2d, ZeroKernelGivesZeroOutput) {
  SplitMix64 rng(2);
  auto x = random_tensor<float>({2, 3, 6, 7}, rng);
  Tensor4<float> w(4, 3, 3, 3);
  Tensor4<float> b(1, 4, 1, 1);
  ConvSpec spec{3, 4, 3, 3, 1, 1, true};
  auto out = ops::conv2d_fwd(x, w, &b, spec);
  for (std::int64_t i = 0; i < out.size(); ++i) EXPECT_EQ(out.data()[i], 0.0f);
}

TEST(Conv2d, MatchesDirectOracle) {
  SplitMix64 rng(3);
  auto x = random_tensor<double>({1, 2, 5, 5}, rng);
  auto w = random_tensor<double>({3, 2, 3, 3}, rng);
  ConvSpec spec{2, 3, 3, 3, 1, 0, false};
  auto out = ops::conv2d_fwd(x, w, nullptr, spec);
  auto ref = oracle::direct_conv2d(x, w, {}, 1, 0);
  EXPECT_EQ(out.dims(), ref.dims());
  EXPECT_LT(max_abs_diff(out, ref), 1e-12);
}

TEST(Conv2d, RandomShapesMatchOracleBothPrecisions) {
  SplitMix64 rng(4);
  for (int iter = 0; iter < 25; ++iter) {
    const int ci = 1 + static_cast<int>(rng.next_below(3));
    const int co = 1 + static_cast<int>(rng.next_below(3));
    const int kh = 1 + static_cast<int>(rng.next_below(3));
    const int kw = 1 + static_cast<int>(rng.next_below(3));
    const int stride = 1 + static_cast<int>(rng.next_below(2));
    const int pad = static_cast<int>(rng.next_below(2));
    const int h = kh + static_cast<int>(rng.next_below(6));
    const int w = kw + static_cast<int>(rng.next_below(6));
    const int n = 1 + static_cast<int>(rng.next_below(2));

    auto xd = random_tensor<double>({n, ci, h, w}, rng);
    auto wd = random_tensor<double>({co, ci, kh, kw}, rng);
    std::vector<double> bias(static_cast<std::size_t>(co));
    Tensor4<double> bt(1, co, 1, 1);
    for (int j = 0; j < co; ++j) {
      bias[static_cast<std::size_t>(j)] = rng.next_uniform(-1, 1);
      bt.at(0, j, 0, 0) = bias[static_cast<std::size_t>(j)];
    }
    ConvSpec spec{ci, co, kh, kw, stride, pad, true};
    auto out = ops::conv2d_fwd(xd, wd, &bt, spec);
    auto ref = oracle::direct_conv2d(xd, wd, bias, stride, pad);
    ASSERT_EQ(out.dims(), ref.dims());
    EXPECT_LT(max_abs_diff(out, ref), 1e-10);

    auto xf = xd.cast<float>();
    auto wf = wd.cast<float>();
    auto btf = bt.cast<float>();
    auto outf = ops::conv2d_fwd(xf, wf, &btf, spec);
    auto reff = ref.cast<float>();
    EXPECT_LT(max_abs_diff(outf, reff), 1e-5f);
  }
}

TEST(Conv2d, ShapeErrorsNameBothShapes) {
  Tensor4<float> x(1, 2, 4, 4);
  Tensor4<float> w(3, 3, 3, 3);
  ConvSpec spec{3, 3, 3, 3, 1, 1, false};
  try {
    ops::conv2d_fwd(x, w, nullptr, spec);
    FAIL() << "expected ShapeError";
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("1x2x4x4"), std::string::npos);
    EXPECT_NE(msg.find("3"), std::string::npos);
  }
}

TEST(Conv2d, NonPositiveOutputIsConfigError) {
  Tensor4<float> x(1, 1, 2, 2);
  Tensor4<float> w(1, 1, 5, 5);
  ConvSpec spec{1, 1, 5, 5, 1, 0, false};
  EXPECT_THROW(ops::conv2d_fwd(x, w, nullptr, spec), ConfigError);
}

// --- axial depthwise --------------------------------------------------------

TEST(AxialDepthwise, ZeroKernelsLeaveResidualOnly) {
  SplitMix64 rng(5);
  auto x = random_tensor<float>({1, 3, 6, 6}, rng);
  Tensor4<float> hk(3, 1, 1, 5), vk(3, 1, 5, 1);
  auto out = ops::axial_depthwise_fwd(x, hk, vk);
  EXPECT_TRUE(bitwise_equal(out, x));
}

TEST(AxialDepthwise, CenteredIdentityKernelsTripleTheInput) {
  SplitMix64 rng(6);
  auto x = random_tensor<double>({1, 2, 5, 7}, rng);
  Tensor4<double> hk(2, 1, 1, 3), vk(2, 1, 3, 1);
  for (int c = 0; c < 2; ++c) {
    hk.at(c, 0, 0, 1) = 1.0;
    vk.at(c, 0, 1, 0) = 1.0;
  }
  auto out = ops::axial_depthwise_fwd(x, hk, vk);
  for (std::int64_t i = 0; i < x.size(); ++i) EXPECT_NEAR(out.data()[i], 3.0 * x.data()[i], 1e-12);
}

TEST(AxialDepthwise, MatchesPerChannelOracle) {
  SplitMix64 rng(7);
  auto x = random_tensor<double>({1, 4, 8, 8}, rng);
  auto hk = random_tensor<double>({4, 1, 1, 7}, rng);
  auto vk = random_tensor<double>({4, 1, 7, 1}, rng);
  auto out = ops::axial_depthwise_fwd(x, hk, vk);
  auto ref = oracle::axial_depthwise_ref(x, hk, vk);
  EXPECT_LT(max_abs_diff(out, ref), 1e-10);
}

TEST(AxialDepthwise, EvenKernelIsConfigError) {
  Tensor4<float> x(1, 1, 4, 4), hk(1, 1, 1, 4), vk(1, 1, 4, 1);
  EXPECT_THROW(ops::axial_depthwise_fwd(x, hk, vk), ConfigError);
}

TEST(AxialDepthwise, KernelCountMismatchIsShapeError) {
  Tensor4<float> x(1, 3, 4, 4), hk(2, 1, 1, 3), vk(2, 1, 3, 1);
  EXPECT_THROW(ops::axial_depthwise_fwd(x, hk, vk), ShapeError);
}

TEST(AxialDepthwise, EachChannelDependsOnlyOnItsOwnInput) {
  SplitMix64 rng(8);
  auto x = random_tensor<double>({1, 4, 6, 6}, rng);
  auto hk = random_tensor<double>({4, 1, 1, 5}, rng);
  auto vk = random_tensor<double>({4, 1, 5, 1}, rng);
  auto base = ops::axial_depthwise_fwd(x, hk, vk);

  // zeroing channel 2 zeroes output channel 2 and leaves the rest bitwise
  auto x2 = x;
  for (int y = 0; y < 6; ++y)
    for (int w = 0; w < 6; ++w) x2.at(0, 2, y, w) = 0.0;
  auto out = ops::axial_depthwise_fwd(x2, hk, vk);
  for (int c = 0; c < 4; ++c)
    for (int y = 0; y < 6; ++y)
      for (int w = 0; w < 6; ++w) {
        if (c == 2)
          EXPECT_EQ(out.at(0, c, y, w), 0.0);
        else
          EXPECT_EQ(out.at(0, c, y, w), base.at(0, c, y, w));
      }
}

// --- pointwise ---------------------------------------------------------------

TEST(Pointwise, IdentityWeightsPreserveInput) {
  SplitMix64 rng(9);
  auto x = random_tensor<float>({2, 3, 4, 4}, rng);
  Tensor4<float> w(3, 3, 1, 1);
  for (int i = 0; i < 3; ++i) w.at(i, i, 0, 0) = 1.0f;
  auto out = ops::pointwise_fwd(x, w, nullptr);
  EXPECT_TRUE(bitwise_equal(out, x));
}

TEST(Pointwise, ConstantChannelArithmetic) {
  Tensor4<double> x(1, 2, 2, 2);
  for (int y = 0; y < 2; ++y)
    for (int w = 0; w < 2; ++w) {
      x.at(0, 0, y, w) = 1.0;
      x.at(0, 1, y, w) = 2.0;
    }
  Tensor4<double> wt(1, 2, 1, 1);
  wt.at(0, 0, 0, 0) = 0.5;
  wt.at(0, 1, 0, 0) = 0.25;
  auto out = ops::pointwise_fwd(x, wt, nullptr);
  for (std::int64_t i = 0; i < out.size(); ++i) EXPECT_DOUBLE_EQ(out.data()[i], 1.0);
}

TEST(Pointwise, ReducesToConv2dWith1x1Kernels) {
  SplitMix64 rng(10);
  auto x = random_tensor<double>({2, 3, 5, 6}, rng);
  auto w = random_tensor<double>({4, 3, 1, 1}, rng);
  Tensor4<double> b(1, 4, 1, 1);
  fill_uniform(b, rng, -1, 1);
  auto out = ops::pointwise_fwd(x, w, &b);
  ConvSpec spec{3, 4, 1, 1, 1, 0, true};
  auto ref = ops::conv2d_fwd(x, w, &b, spec);
  EXPECT_LT(max_abs_diff(out, ref), 1e-12);
  std::vector<double> bias(4);
  for (int j = 0; j < 4; ++j) bias[static_cast<std::size_t>(j)] = b.at(0, j, 0, 0);
  auto ref2 = oracle::direct_conv2d(x, w, bias, 1, 0);
  EXPECT_LT(max_abs_diff(out, ref2), 1e-10);
}

// --- pooling / upsampling ----------------------------------------------------

TEST(GlobalAvgPool, SmallExamples) {
  Tensor4<double> x(1, 1, 2, 2);
  x.at(0, 0, 0, 0) = 1;
  x.at(0, 0, 0, 1) = 2;
  x.at(0, 0, 1, 0) = 3;
  x.at(0, 0, 1, 1) = 4;
  auto out = ops::global_avg_pool_fwd(x);
  EXPECT_DOUBLE_EQ(out.at(0, 0, 0, 0), 2.5);

  auto c = Tensor4<double>::full({1, 2, 3, 3}, 0.7);
  auto oc = ops::global_avg_pool_fwd(c);
  EXPECT_NEAR(oc.at(0, 1, 0, 0), 0.7, 1e-15);
}

TEST(GlobalAvgPool, MatchesMeanOracle) {
  SplitMix64 rng(11);
  auto x = random_tensor<double>({2, 3, 5, 7}, rng);
  auto out = ops::global_avg_pool_fwd(x);
  for (int n = 0; n < 2; ++n)
    for (int c = 0; c < 3; ++c) {
      double acc = 0;
      for (int y = 0; y < 5; ++y)
        for (int w = 0; w < 7; ++w) acc += x.at(n, c, y, w);
      EXPECT_NEAR(out.at(n, c, 0, 0), acc / 35.0, 1e-7);
    }
}

TEST(GlobalAvgPool, EmptySpatialExtentIsShapeError) {
  Tensor4<float> x(1, 2, 0, 4);
  EXPECT_THROW(ops::global_avg_pool_fwd(x), ShapeError);
}

TEST(DownsampleMax2, TakesBlockMax) {
  Tensor4<double> x(1, 1, 2, 2);
  x.at(0, 0, 0, 0) = 1;
  x.at(0, 0, 0, 1) = 2;
  x.at(0, 0, 1, 0) = 3;
  x.at(0, 0, 1, 1) = 4;
  auto out = ops::downsample_max2_fwd(x);
  EXPECT_EQ(out.dims(), (Dims4{1, 1, 1, 1}));
  EXPECT_DOUBLE_EQ(out.at(0, 0, 0, 0), 4.0);
}

TEST(DownsampleMax2, OddDimsAreShapeError) {
  Tensor4<float> x(1, 1, 3, 4);
  EXPECT_THROW(ops::downsample_max2_fwd(x), ShapeError);
}

TEST(UpsampleBilinear2, ConstantStaysConstant) {
  auto x = Tensor4<double>::full({1, 2, 3, 3}, 0.37);
  auto out = ops::upsample_bilinear2_fwd(x);
  EXPECT_EQ(out.dims(), (Dims4{1, 2, 6, 6}));
  for (std::int64_t i = 0; i < out.size(); ++i) EXPECT_NEAR(out.data()[i], 0.37, 1e-12);
}

TEST(UpsampleBilinear2, LinearRampStaysLinear) {
  // corner-aligned bilinear interpolation reproduces linear functions exactly
  const int H = 4, W = 8;
  Tensor4<double> x(1, 1, H, W);
  for (int y = 0; y < H; ++y)
    for (int w = 0; w < W; ++w) x.at(0, 0, y, w) = 0.25 * y + 0.5 * w + 0.1;
  auto out = ops::upsample_bilinear2_fwd(x);
  for (int y = 0; y < 2 * H; ++y)
    for (int w = 0; w < 2 * W; ++w) {
      const double sy = static_cast<double>(y) * (H - 1) / (2 * H - 1);
      const double sx = static_cast<double>(w) * (W - 1) / (2 * W - 1);
      EXPECT_NEAR(out.at(0, 0, y, w), 0.25 * sy + 0.5 * sx + 0.1, 1e-6);
    }
}

// --- concat / slice ----------------------------------------------------------

TEST(ConcatChannels, EmptySecondOperandIsIdentity) {
  SplitMix64 rng(12);
  auto x = random_tensor<float>({1, 3, 4, 4}, rng);
  Tensor4<float> empty(1, 0, 4, 4);
  auto out = ops::concat_channels_fwd(x, empty);
  EXPECT_TRUE(bitwise_equal(out, x));
}

TEST(ConcatChannels, LayoutAndRoundTrip) {
  SplitMix64 rng(13);
  auto a = random_tensor<double>({1, 2, 2, 2}, rng);
  auto b = random_tensor<double>({1, 3, 2, 2}, rng);
  auto out = ops::concat_channels_fwd(a, b);
  EXPECT_EQ(out.c(), 5);
  EXPECT_TRUE(bitwise_equal(ops::slice_channels(out, 0, 2), a));
  EXPECT_TRUE(bitwise_equal(ops::slice_channels(out, 2, 5), b));
}

TEST(ConcatChannels, SpatialMismatchIsShapeError) {
  Tensor4<float> a(1, 2, 4, 4), b(1, 2, 4, 5);
  EXPECT_THROW(ops::concat_channels_fwd(a, b), ShapeError);
}

// --- activations --------------------------------------------------------------

TEST(Activation, PointValues) {
  Tensor4<double> x(1, 1, 1, 3);
  x.at(0, 0, 0, 0) = -1;
  x.at(0, 0, 0, 1) = 2;
  x.at(0, 0, 0, 2) = 0;
  auto r = ops::activation_fwd(x, ActivationKind::relu);
  EXPECT_DOUBLE_EQ(r.at(0, 0, 0, 0), 0.0);
  EXPECT_DOUBLE_EQ(r.at(0, 0, 0, 1), 2.0);
  auto s = ops::activation_fwd(x, ActivationKind::sigmoid);
  EXPECT_DOUBLE_EQ(s.at(0, 0, 0, 2), 0.5);
  auto t = ops::activation_fwd(x, ActivationKind::tanh);
  EXPECT_DOUBLE_EQ(t.at(0, 0, 0, 2), 0.0);
}

TEST(Activation, RangeBounds) {
  // moderate magnitudes: beyond ~|x|=19 double tanh saturates to exactly 1
  SplitMix64 rng(14);
  auto x = random_tensor<double>({1, 2, 8, 8}, rng, -8, 8);
  auto s = ops::activation_fwd(x, ActivationKind::sigmoid);
  auto t = ops::activation_fwd(x, ActivationKind::tanh);
  for (std::int64_t i = 0; i < x.size(); ++i) {
    EXPECT_GT(s.data()[i], 0.0);
    EXPECT_LT(s.data()[i], 1.0);
    EXPECT_GT(t.data()[i], -1.0);
    EXPECT_LT(t.data()[i], 1.0);
  }
}

// --- module-level properties ---------------------------------------------------

TEST(OpsProperties, LinearityOfBiasFreeOps) {
  SplitMix64 rng(15);
  const double alpha = 0.7, beta = -1.3;
  auto x = random_tensor<double>({1, 3, 6, 6}, rng);
  auto y = random_tensor<double>({1, 3, 6, 6}, rng);
  Tensor4<double> combo(x.dims());
  for (std::int64_t i = 0; i < x.size(); ++i) combo.data()[i] = alpha * x.data()[i] + beta * y.data()[i];

  {
    auto w = random_tensor<double>({2, 3, 3, 3}, rng);
    ConvSpec spec{3, 2, 3, 3, 1, 1, false};
    auto lhs = ops::conv2d_fwd(combo, w, nullptr, spec);
    auto ox = ops::conv2d_fwd(x, w, nullptr, spec);
    auto oy = ops::conv2d_fwd(y, w, nullptr, spec);
    for (std::int64_t i = 0; i < lhs.size(); ++i)
      EXPECT_NEAR(lhs.data()[i], alpha * ox.data()[i] + beta * oy.data()[i], 1e-5);
  }
  {
    auto w = random_tensor<double>({4, 3, 1, 1}, rng);
    auto lhs = ops::pointwise_fwd(combo, w, nullptr);
    auto ox = ops::pointwise_fwd(x, w, nullptr);
    auto oy = ops::pointwise_fwd(y, w, nullptr);
    for (std::int64_t i = 0; i < lhs.size(); ++i)
      EXPECT_NEAR(lhs.data()[i], alpha * ox.data()[i] + beta * oy.data()[i], 1e-5);
  }
  {
    auto hk = random_tensor<double>({3, 1, 1, 5}, rng);
    auto vk = random_tensor<double>({3, 1, 5, 1}, rng);
    auto lhs = ops::axial_depthwise_fwd(combo, hk, vk);
    auto ox = ops::axial_depthwise_fwd(x, hk, vk);
    auto oy = ops::axial_depthwise_fwd(y, hk, vk);
    for (std::int64_t i = 0; i < lhs.size(); ++i)
      EXPECT_NEAR(lhs.data()[i], alpha * ox.data()[i] + beta * oy.data()[i], 1e-5);
  }
}

TEST(OpsProperties, TranslationEquivariance) {
  // shift the input one pixel right/down inside a zero frame, convolve,
  // and compare the interior against the shifted convolution
  SplitMix64 rng(16);
  const int H = 8, W = 8, dy = 1, dx = 1;
  auto core = random_tensor<double>({1, 1, H, W}, rng);
  Tensor4<double> frame(1, 1, H + 2, W + 2);
  Tensor4<double> shifted(1, 1, H + 2, W + 2);
  for (int y = 0; y < H; ++y)
    for (int w = 0; w < W; ++w) {
      frame.at(0, 0, y, w) = core.at(0, 0, y, w);
      shifted.at(0, 0, y + dy, w + dx) = core.at(0, 0, y, w);
    }
  auto k = random_tensor<double>({1, 1, 3, 3}, rng);
  ConvSpec spec{1, 1, 3, 3, 1, 1, false};
  auto a = ops::conv2d_fwd(frame, k, nullptr, spec);
  auto b = ops::conv2d_fwd(shifted, k, nullptr, spec);
  // interior rows untouched by the padding of either variant
  for (int y = 1; y < H - 1; ++y)
    for (int w = 1; w < W - 1; ++w) EXPECT_NEAR(a.at(0, 0, y, w), b.at(0, 0, y + dy, w + dx), 1e-12);
}

TEST(OpsProperties, RepeatedForwardIsBitwiseDeterministic) {
  SplitMix64 rng(17);
  auto x = random_tensor<float>({2, 3, 8, 8}, rng);
  auto w = random_tensor<float>({4, 3, 3, 3}, rng);
  ConvSpec spec{3, 4, 3, 3, 1, 1, false};
  auto a = ops::conv2d_fwd(x, w, nullptr, spec);
  auto b = ops::conv2d_fwd(x, w, nullptr, spec);
  EXPECT_TRUE(bitwise_equal(a, b));
}

TEST(OpsProperties, ParallelExecutionMatchesSingleThread) {
  SplitMix64 rng(18);
  auto x = random_tensor<float>({1, 8, 16, 16}, rng);
  auto w = random_tensor<float>({8, 8, 3, 3}, rng);
  ConvSpec spec{8, 8, 3, 3, 1, 1, false};
  runtime::set_thread_count(1);
  auto a = ops::conv2d_fwd(x, w, nullptr, spec);
  runtime::set_thread_count(4);
  auto b = ops::conv2d_fwd(x, w, nullptr, spec);
  runtime::set_thread_count(1);
  EXPECT_TRUE(bitwise_equal(a, b));
}

TEST(OpsProperties, OperatorsPreserveFiniteness) {
  SplitMix64 rng(19);
  auto x = random_tensor<double>({1, 4, 8, 8}, rng);
  auto hk = random_tensor<double>({4, 1, 1, 7}, rng);
  auto vk = random_tensor<double>({4, 1, 7, 1}, rng);
  EXPECT_TRUE(ops::axial_depthwise_fwd(x, hk, vk).all_finite());
  EXPECT_TRUE(ops::global_avg_pool_fwd(x).all_finite());
  EXPECT_TRUE(ops::downsample_max2_fwd(x).all_finite());
  EXPECT_TRUE(ops::upsample_bilinear2_fwd(x).all_finite());
  EXPECT_TRUE(ops::activation_fwd(x, ActivationKind::sigmoid).all_finite());
}

}  // namespace

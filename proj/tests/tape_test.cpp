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
#include "lu2net/tape.hpp"
#include "oracles.hpp"
#include "testutil.hpp"

using namespace lu2net;
using ad::Tape;
using ad::Var;
using testutil::random_tensor;
using testutil::random_tensor_away_from;

namespace {

constexpr double kStep = 1e-5;
constexpr double kTol = 1e-4;

Tensor4<double> scalar_seed() {
  Tensor4<double> s(1, 1, 1, 1);
  s.data()[0] = 1.0;
  return s;
}

/// Projects an output tensor to a scalar with fixed random weights so the
/// whole Jacobian is exercised by a single reverse sweep.
Var<double> project(Tape<double>& tape, Var<double> v, std::uint64_t seed) {
  SplitMix64 rng(seed);
  Tensor4<double> w(tape.value(v).dims());
  fill_uniform(w, rng, -1.0, 1.0);
  return ad::sum_all(ad::mul(v, tape.constant(std::move(w))));
}

TEST(Tape, SumSeedOnIdentityPointwiseGivesOnes) {
  SplitMix64 rng(21);
  auto xv = random_tensor<double>({1, 3, 4, 4}, rng);
  Tape<double> tape;
  auto x = tape.leaf(xv, true);
  Tensor4<double> wv(3, 3, 1, 1);
  for (int i = 0; i < 3; ++i) wv.at(i, i, 0, 0) = 1.0;
  auto out = ad::pointwise(x, tape.constant(wv), std::nullopt);
  auto s = ad::sum_all(out);
  tape.backward(s, scalar_seed());
  const auto& g = tape.grad(x);
  for (std::int64_t i = 0; i < g.size(); ++i) EXPECT_DOUBLE_EQ(g.data()[i], 1.0);
}

TEST(Tape, ZeroSeedGivesZeroGradients) {
  SplitMix64 rng(22);
  auto xv = random_tensor<double>({1, 2, 4, 4}, rng);
  Tape<double> tape;
  auto x = tape.leaf(xv, true);
  auto out = ad::tanh_op(ad::scalar_affine(x, 2.0, 0.25));
  Tensor4<double> seed(tape.value(out).dims());
  tape.backward(out, seed);
  const auto& g = tape.grad(x);
  for (std::int64_t i = 0; i < g.size(); ++i) EXPECT_EQ(g.data()[i], 0.0);
}

TEST(Tape, GradForForeignTensorIsLookupError) {
  Tape<double> tape;
  auto x = tape.leaf(Tensor4<double>(1, 1, 1, 1), true);
  auto y = ad::scalar_affine(x, 2.0, 0.0);
  tape.backward(y, scalar_seed());
  Tape<double> other;
  auto z = other.leaf(Tensor4<double>(1, 1, 1, 1), true);
  EXPECT_THROW(tape.grad(z), LookupError);
}

TEST(Tape, SeedShapeMismatchIsShapeError) {
  Tape<double> tape;
  auto x = tape.leaf(Tensor4<double>(1, 2, 2, 2), true);
  auto y = ad::relu(x);
  EXPECT_THROW(tape.backward(y, scalar_seed()), ShapeError);
}

// --- per-operator finite-difference checks (64-bit) -------------------------

TEST(GradCheck, LinearMapErrorNearMachineEps) {
  SplitMix64 rng(23);
  auto x = random_tensor<double>({1, 2, 3, 3}, rng);
  auto rep = ad::grad_check<double>(
      [](Tape<double>& t, Var<double> in) { return ad::sum_all(ad::scalar_affine(in, 1.75, 0.25)); }, x, kStep);
  EXPECT_LT(rep.max_rel_err, 1e-8);
}

TEST(GradCheck, Conv2dInputAndParams) {
  SplitMix64 rng(24);
  auto x = random_tensor<double>({2, 2, 6, 6}, rng);
  auto w = random_tensor<double>({3, 2, 3, 3}, rng);
  auto b = random_tensor<double>({1, 3, 1, 1}, rng);
  ConvSpec spec{2, 3, 3, 3, 1, 1, true};

  auto rep_x = ad::grad_check<double>(
      [&](Tape<double>& t, Var<double> in) {
        auto out = ad::conv2d(in, t.constant(w), std::optional(t.constant(b)), spec);
        return project(t, out, 101);
      },
      x, kStep);
  EXPECT_LT(rep_x.max_rel_err, kTol);

  auto rep_w = ad::grad_check<double>(
      [&](Tape<double>& t, Var<double> in) {
        auto out = ad::conv2d(t.constant(x), in, std::optional(t.constant(b)), spec);
        return project(t, out, 102);
      },
      w, kStep);
  EXPECT_LT(rep_w.max_rel_err, kTol);

  auto rep_b = ad::grad_check<double>(
      [&](Tape<double>& t, Var<double> in) {
        auto out = ad::conv2d(t.constant(x), t.constant(w), std::optional(in), spec);
        return project(t, out, 103);
      },
      b, kStep);
  EXPECT_LT(rep_b.max_rel_err, kTol);
}

TEST(GradCheck, StridedPaddedConv2d) {
  SplitMix64 rng(25);
  auto x = random_tensor<double>({1, 2, 7, 7}, rng);
  auto w = random_tensor<double>({2, 2, 3, 3}, rng);
  ConvSpec spec{2, 2, 3, 3, 2, 1, false};
  auto rep = ad::grad_check<double>(
      [&](Tape<double>& t, Var<double> in) {
        return project(t, ad::conv2d(in, t.constant(w), std::nullopt, spec), 104);
      },
      x, kStep);
  EXPECT_LT(rep.max_rel_err, kTol);
}

TEST(GradCheck, AxialDepthwiseInputAndKernels) {
  SplitMix64 rng(26);
  auto x = random_tensor<double>({1, 3, 8, 8}, rng);
  auto hk = random_tensor<double>({3, 1, 1, 7}, rng);
  auto vk = random_tensor<double>({3, 1, 7, 1}, rng);

  auto rep_x = ad::grad_check<double>(
      [&](Tape<double>& t, Var<double> in) {
        return project(t, ad::axial_depthwise(in, t.constant(hk), t.constant(vk)), 111);
      },
      x, kStep);
  EXPECT_LT(rep_x.max_rel_err, kTol);

  auto rep_h = ad::grad_check<double>(
      [&](Tape<double>& t, Var<double> in) {
        return project(t, ad::axial_depthwise(t.constant(x), in, t.constant(vk)), 112);
      },
      hk, kStep);
  EXPECT_LT(rep_h.max_rel_err, kTol);

  auto rep_v = ad::grad_check<double>(
      [&](Tape<double>& t, Var<double> in) {
        return project(t, ad::axial_depthwise(t.constant(x), t.constant(hk), in), 113);
      },
      vk, kStep);
  EXPECT_LT(rep_v.max_rel_err, kTol);
}

TEST(GradCheck, PointwiseAllLeaves) {
  SplitMix64 rng(27);
  auto x = random_tensor<double>({2, 3, 4, 4}, rng);
  auto w = random_tensor<double>({4, 3, 1, 1}, rng);
  auto b = random_tensor<double>({1, 4, 1, 1}, rng);
  for (int leaf = 0; leaf < 3; ++leaf) {
    const Tensor4<double>& probe = leaf == 0 ? x : (leaf == 1 ? w : b);
    auto rep = ad::grad_check<double>(
        [&](Tape<double>& t, Var<double> in) {
          Var<double> xv = leaf == 0 ? in : t.constant(x);
          Var<double> wv = leaf == 1 ? in : t.constant(w);
          Var<double> bv = leaf == 2 ? in : t.constant(b);
          return project(t, ad::pointwise(xv, wv, std::optional(bv)), 120 + leaf);
        },
        probe, kStep);
    EXPECT_LT(rep.max_rel_err, kTol) << "leaf " << leaf;
  }
}

TEST(GradCheck, PoolingAndResampling) {
  SplitMix64 rng(28);
  // max pool: keep entries well separated so the FD step never flips a max
  Tensor4<double> x(1, 2, 4, 4);
  {
    std::vector<double> vals;
    for (int i = 0; i < static_cast<int>(x.size()); ++i) vals.push_back(0.05 * i);
    // deterministic shuffle
    SplitMix64 sh(29);
    for (std::size_t i = vals.size(); i > 1; --i) std::swap(vals[i - 1], vals[sh.next_below(i)]);
    for (std::int64_t i = 0; i < x.size(); ++i) x.data()[i] = vals[static_cast<std::size_t>(i)];
  }
  auto rep_pool = ad::grad_check<double>(
      [](Tape<double>& t, Var<double> in) { return project(t, ad::downsample_max2(in), 131); }, x, kStep);
  EXPECT_LT(rep_pool.max_rel_err, kTol);

  auto y = random_tensor<double>({1, 2, 4, 5}, rng);
  auto rep_up = ad::grad_check<double>(
      [](Tape<double>& t, Var<double> in) { return project(t, ad::upsample_bilinear2(in), 132); }, y, kStep);
  EXPECT_LT(rep_up.max_rel_err, kTol);

  auto z = random_tensor<double>({1, 3, 3, 4}, rng);
  auto rep_gap = ad::grad_check<double>(
      [](Tape<double>& t, Var<double> in) { return project(t, ad::global_avg_pool(in), 133); }, z, kStep);
  EXPECT_LT(rep_gap.max_rel_err, kTol);
}

TEST(GradCheck, ConcatBothSides) {
  SplitMix64 rng(30);
  auto a = random_tensor<double>({1, 2, 3, 3}, rng);
  auto b = random_tensor<double>({1, 3, 3, 3}, rng);
  auto rep_a = ad::grad_check<double>(
      [&](Tape<double>& t, Var<double> in) { return project(t, ad::concat_channels(in, t.constant(b)), 141); }, a,
      kStep);
  EXPECT_LT(rep_a.max_rel_err, kTol);
  auto rep_b = ad::grad_check<double>(
      [&](Tape<double>& t, Var<double> in) { return project(t, ad::concat_channels(t.constant(a), in), 142); }, b,
      kStep);
  EXPECT_LT(rep_b.max_rel_err, kTol);
}

TEST(GradCheck, ActivationsAwayFromKinks) {
  SplitMix64 rng(31);
  auto x = random_tensor_away_from<double>({1, 2, 4, 4}, rng, -2.0, 2.0, {0.0}, 1e-3);
  for (auto kind : {ActivationKind::relu, ActivationKind::sigmoid, ActivationKind::tanh, ActivationKind::identity}) {
    auto rep = ad::grad_check<double>(
        [&](Tape<double>& t, Var<double> in) { return project(t, ad::activation(in, kind), 151); }, x, kStep);
    const double tol = kind == ActivationKind::relu ? 1e-6 : kTol;
    EXPECT_LT(rep.max_rel_err, tol) << activation_name(kind);
  }
}

TEST(GradCheck, TanhGradientAtZeroIsOne) {
  Tensor4<double> x(1, 1, 1, 1);
  Tape<double> tape;
  auto in = tape.leaf(x, true);
  auto out = ad::tanh_op(in);
  tape.backward(out, scalar_seed());
  EXPECT_DOUBLE_EQ(tape.grad(in).data()[0], 1.0);
  auto rep = ad::grad_check<double>(
      [](Tape<double>& t, Var<double> v) { return ad::sum_all(ad::tanh_op(v)); }, x, kStep);
  EXPECT_LT(rep.max_rel_err, kTol);
}

TEST(GradCheck, ElementwiseAndReductions) {
  SplitMix64 rng(32);
  auto x = random_tensor<double>({1, 2, 3, 3}, rng);
  auto y = random_tensor<double>({1, 2, 3, 3}, rng);

  auto rep_add = ad::grad_check<double>(
      [&](Tape<double>& t, Var<double> in) { return project(t, ad::add(in, t.constant(y)), 161); }, x, kStep);
  EXPECT_LT(rep_add.max_rel_err, kTol);

  auto rep_sub = ad::grad_check<double>(
      [&](Tape<double>& t, Var<double> in) { return project(t, ad::sub(t.constant(y), in), 162); }, x, kStep);
  EXPECT_LT(rep_sub.max_rel_err, kTol);

  auto rep_mul = ad::grad_check<double>(
      [&](Tape<double>& t, Var<double> in) { return project(t, ad::mul(in, t.constant(y)), 163); }, x, kStep);
  EXPECT_LT(rep_mul.max_rel_err, kTol);

  auto rep_sq = ad::grad_check<double>(
      [](Tape<double>& t, Var<double> in) { return ad::sum_all(ad::mul(in, in)); }, x, kStep);
  EXPECT_LT(rep_sq.max_rel_err, kTol);

  auto rep_mean = ad::grad_check<double>(
      [](Tape<double>& t, Var<double> in) { return ad::mean_all(in); }, x, kStep);
  EXPECT_LT(rep_mean.max_rel_err, kTol);

  auto rep_cs = ad::grad_check<double>(
      [](Tape<double>& t, Var<double> in) {
        return project(t, ad::channel_scale(in, std::vector<double>{0.5, -2.0}), 164);
      },
      x, kStep);
  EXPECT_LT(rep_cs.max_rel_err, kTol);
}

TEST(GradCheck, BroadcastMulBothSides) {
  SplitMix64 rng(33);
  auto x = random_tensor<double>({2, 3, 4, 4}, rng);
  auto gate = random_tensor<double>({2, 3, 1, 1}, rng, 0.1, 0.9);
  auto rep_x = ad::grad_check<double>(
      [&](Tape<double>& t, Var<double> in) { return project(t, ad::bcast_mul(in, t.constant(gate)), 171); }, x,
      kStep);
  EXPECT_LT(rep_x.max_rel_err, kTol);
  auto rep_g = ad::grad_check<double>(
      [&](Tape<double>& t, Var<double> in) { return project(t, ad::bcast_mul(t.constant(x), in), 172); }, gate,
      kStep);
  EXPECT_LT(rep_g.max_rel_err, kTol);
}

TEST(GradCheck, Clamp01AwayFromEdges) {
  SplitMix64 rng(34);
  auto x = random_tensor_away_from<double>({1, 2, 3, 3}, rng, 0.05, 0.95, {0.0, 1.0}, 1e-3);
  auto rep = ad::grad_check<double>(
      [](Tape<double>& t, Var<double> in) { return project(t, ad::clamp01(in), 181); }, x, kStep);
  EXPECT_LT(rep.max_rel_err, kTol);
}

TEST(GradCheck, AngleDiffAwayFromWrap) {
  SplitMix64 rng(35);
  auto a = random_tensor<double>({1, 1, 3, 3}, rng, -2.0, 2.0);
  auto b = random_tensor<double>({1, 1, 3, 3}, rng, -2.0, 2.0);
  auto rep = ad::grad_check<double>(
      [&](Tape<double>& t, Var<double> in) {
        auto d = ad::angle_diff(in, t.constant(b));
        return ad::mean_all(ad::mul(d, d));
      },
      a, kStep);
  EXPECT_LT(rep.max_rel_err, kTol);
}

TEST(GradCheck, ColorConversionsAwayFromBreakpoints) {
  SplitMix64 rng(36);
  // keep sRGB components away from the gamma knee at 0.04045
  auto x = random_tensor_away_from<double>({1, 3, 3, 3}, rng, 0.05, 0.95, {0.04045}, 1e-3);
  auto rep_lab = ad::grad_check<double>(
      [](Tape<double>& t, Var<double> in) { return project(t, ad::srgb_to_lab(in), 191); }, x, kStep);
  EXPECT_LT(rep_lab.max_rel_err, kTol);

  // LAB input with chroma comfortably above the achromatic guard
  Tape<double> tmp;
  auto lab = color::srgb_to_lab_tensor(x);
  auto rep_lch = ad::grad_check<double>(
      [](Tape<double>& t, Var<double> in) { return project(t, ad::lab_to_lch(in), 192); }, lab, kStep);
  EXPECT_LT(rep_lch.max_rel_err, kTol);
}

// --- receptive-field sparsity (Jacobian rows via one-hot seeds) --------------

Tensor4<double> one_hot(const Dims4& d, int n, int c, int y, int x) {
  Tensor4<double> t(d);
  t.at(n, c, y, x) = 1.0;
  return t;
}

TEST(ReceptiveField, SingleAxialLayerIsACross) {
  SplitMix64 rng(37);
  const int H = 15, W = 15, k = 7, off = (k - 1) / 2;
  auto xv = random_tensor<double>({1, 1, H, W}, rng);
  auto hk = random_tensor<double>({1, 1, 1, k}, rng, 0.1, 1.0);
  auto vk = random_tensor<double>({1, 1, k, 1}, rng, 0.1, 1.0);
  Tape<double> tape;
  auto x = tape.leaf(xv, true);
  auto out = ad::axial_depthwise(x, tape.constant(hk), tape.constant(vk));
  const int cy = 7, cx = 7;
  tape.backward(out, one_hot(tape.value(out).dims(), 0, 0, cy, cx));
  const auto& g = tape.grad(x);
  for (int y = 0; y < H; ++y)
    for (int w = 0; w < W; ++w) {
      const bool on_cross = (y == cy && std::abs(w - cx) <= off) || (w == cx && std::abs(y - cy) <= off);
      if (on_cross)
        EXPECT_NE(g.at(0, 0, y, w), 0.0) << y << "," << w;
      else
        EXPECT_EQ(g.at(0, 0, y, w), 0.0) << y << "," << w;
    }
}

TEST(ReceptiveField, TwoStackedAxialLayersExceedTheCross) {
  SplitMix64 rng(38);
  const int H = 15, W = 15, k = 7, off = (k - 1) / 2;
  auto xv = random_tensor<double>({1, 1, H, W}, rng);
  auto hk1 = random_tensor<double>({1, 1, 1, k}, rng, 0.1, 1.0);
  auto vk1 = random_tensor<double>({1, 1, k, 1}, rng, 0.1, 1.0);
  auto hk2 = random_tensor<double>({1, 1, 1, k}, rng, 0.1, 1.0);
  auto vk2 = random_tensor<double>({1, 1, k, 1}, rng, 0.1, 1.0);
  Tape<double> tape;
  auto x = tape.leaf(xv, true);
  auto mid = ad::axial_depthwise(x, tape.constant(hk1), tape.constant(vk1));
  auto out = ad::axial_depthwise(mid, tape.constant(hk2), tape.constant(vk2));
  const int cy = 7, cx = 7;
  tape.backward(out, one_hot(tape.value(out).dims(), 0, 0, cy, cx));
  const auto& g = tape.grad(x);
  bool outside_cross_nonzero = false;
  for (int y = 0; y < H && !outside_cross_nonzero; ++y)
    for (int w = 0; w < W; ++w) {
      const bool on_cross = (y == cy && std::abs(w - cx) <= off) || (w == cx && std::abs(y - cy) <= off);
      if (!on_cross && g.at(0, 0, y, w) != 0.0) {
        outside_cross_nonzero = true;
        break;
      }
    }
  EXPECT_TRUE(outside_cross_nonzero);
  // diagonal neighbour is reachable in two axial hops
  EXPECT_NE(g.at(0, 0, cy + 1, cx + 1), 0.0);
}

}  // namespace

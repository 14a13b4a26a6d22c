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

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "lu2net/tape.hpp"

namespace lu2net {

/// Architecture hyperparameters of the U-shape network.
///
/// Encoder block i maps (i == 0 ? input_channels : stage_widths[i-1]) to
/// stage_widths[i] and is followed by a 2x2 max-pool. Decoder blocks run
/// deepest-first; block j upsamples, concatenates the matching encoder skip,
/// and maps to the next shallower width. A pointwise head projects to
/// output_channels with the output activation.
struct NetworkConfig {
  std::vector<int> stage_widths = {64, 96, 128, 192};
  int axial_k = 7;
  int ca_reduction = 8;
  ActivationKind activation = ActivationKind::relu;
  ActivationKind output_activation = ActivationKind::tanh;
  int input_channels = 3;
  int output_channels = 3;

  void validate() const {
    if (stage_widths.empty()) throw ConfigError("stage_widths must be nonempty");
    for (int w : stage_widths)
      if (w < 1) throw ConfigError(strcat_("stage widths must be positive, got ", w));
    if (axial_k < 3 || axial_k % 2 == 0)
      throw ConfigError(strcat_("axial_k must be odd and >= 3, got ", axial_k));
    if (ca_reduction < 1) throw ConfigError(strcat_("ca_reduction must be >= 1, got ", ca_reduction));
    if (input_channels < 1 || output_channels < 1)
      throw ConfigError("input/output channel counts must be positive");
  }

  int stages() const { return static_cast<int>(stage_widths.size()); }
  int downsample_factor() const { return 1 << stages(); }

  int encoder_in(int i) const { return i == 0 ? input_channels : stage_widths[static_cast<std::size_t>(i - 1)]; }
  int encoder_out(int i) const { return stage_widths[static_cast<std::size_t>(i)]; }

  /// Channels entering decoder block j (deepest-first) before the concat.
  int decoder_feed(int j) const {
    return j == 0 ? stage_widths.back() : decoder_out(j - 1);
  }
  int decoder_skip(int j) const { return stage_widths[static_cast<std::size_t>(stages() - 1 - j)]; }
  int decoder_in(int j) const { return decoder_feed(j) + decoder_skip(j); }
  int decoder_out(int j) const {
    const int idx = stages() - 2 - j;
    return stage_widths[static_cast<std::size_t>(idx < 0 ? 0 : idx)];
  }

  int squeeze_width(int channels) const { return std::max(1, channels / ca_reduction); }
};

/// Channel-attention MLP parameters for a block of `channels` outputs.
template <std::floating_point T>
struct CALayerParams {
  Tensor4<T> squeeze_w;  // Cr x C x 1 x 1
  Tensor4<T> squeeze_b;  // 1 x Cr x 1 x 1
  Tensor4<T> excite_w;   // C x Cr x 1 x 1
  Tensor4<T> excite_b;   // 1 x C x 1 x 1

  static CALayerParams sized(int channels, int reduced) {
    return {Tensor4<T>(reduced, channels, 1, 1), Tensor4<T>(1, reduced, 1, 1),
            Tensor4<T>(channels, reduced, 1, 1), Tensor4<T>(1, channels, 1, 1)};
  }
};

template <std::floating_point T>
struct BlockParams {
  Tensor4<T> axial_h;  // Cin x 1 x 1 x k
  Tensor4<T> axial_v;  // Cin x 1 x k x 1
  Tensor4<T> pw_w;     // Cout x Cin x 1 x 1
  Tensor4<T> pw_b;     // 1 x Cout x 1 x 1
  CALayerParams<T> ca;

  static BlockParams sized(int cin, int cout, int k, int reduced) {
    return {Tensor4<T>(cin, 1, 1, k), Tensor4<T>(cin, 1, k, 1), Tensor4<T>(cout, cin, 1, 1),
            Tensor4<T>(1, cout, 1, 1), CALayerParams<T>::sized(cout, reduced)};
  }
};

template <std::floating_point T>
struct Network {
  NetworkConfig config;
  std::vector<BlockParams<T>> encoders;
  std::vector<BlockParams<T>> decoders;  // deepest-first
  Tensor4<T> head_w;                     // out_ch x w0 x 1 x 1
  Tensor4<T> head_b;                     // 1 x out_ch x 1 x 1
};

/// Allocates a zero-filled network of the configured shapes.
template <std::floating_point T>
Network<T> make_network(const NetworkConfig& cfg) {
  cfg.validate();
  Network<T> net;
  net.config = cfg;
  for (int i = 0; i < cfg.stages(); ++i)
    net.encoders.push_back(BlockParams<T>::sized(cfg.encoder_in(i), cfg.encoder_out(i), cfg.axial_k,
                                                 cfg.squeeze_width(cfg.encoder_out(i))));
  for (int j = 0; j < cfg.stages(); ++j)
    net.decoders.push_back(BlockParams<T>::sized(cfg.decoder_in(j), cfg.decoder_out(j), cfg.axial_k,
                                                 cfg.squeeze_width(cfg.decoder_out(j))));
  const int w0 = cfg.decoder_out(cfg.stages() - 1);
  net.head_w = Tensor4<T>(cfg.output_channels, w0, 1, 1);
  net.head_b = Tensor4<T>(1, cfg.output_channels, 1, 1);
  return net;
}

/// Visits every parameter tensor with its stable hierarchical name, in a
/// fixed order shared by init, counting, serialization and the optimizer.
template <std::floating_point T, typename Fn>
void visit_params(Network<T>& net, Fn&& fn) {
  auto block = [&fn](const std::string& prefix, BlockParams<T>& b) {
    fn(prefix + ".axial.h", b.axial_h);
    fn(prefix + ".axial.v", b.axial_v);
    fn(prefix + ".pw.weight", b.pw_w);
    fn(prefix + ".pw.bias", b.pw_b);
    fn(prefix + ".ca.squeeze.weight", b.ca.squeeze_w);
    fn(prefix + ".ca.squeeze.bias", b.ca.squeeze_b);
    fn(prefix + ".ca.excite.weight", b.ca.excite_w);
    fn(prefix + ".ca.excite.bias", b.ca.excite_b);
  };
  for (std::size_t i = 0; i < net.encoders.size(); ++i) block("enc" + std::to_string(i), net.encoders[i]);
  for (std::size_t j = 0; j < net.decoders.size(); ++j) block("dec" + std::to_string(j), net.decoders[j]);
  fn(std::string("head.weight"), net.head_w);
  fn(std::string("head.bias"), net.head_b);
}

template <std::floating_point T, typename Fn>
void visit_params(const Network<T>& net, Fn&& fn) {
  visit_params(const_cast<Network<T>&>(net), [&fn](const std::string& name, Tensor4<T>& t) {
    fn(name, static_cast<const Tensor4<T>&>(t));
  });
}

// ---------------------------------------------------------------------------
// Initialization: Kaiming-uniform (fan-in, relu gain) for weights, zero
// biases, fully determined by the seed.
// ---------------------------------------------------------------------------

template <std::floating_point T>
void kaiming_fill(Tensor4<T>& w, int fan_in, SplitMix64& rng) {
  const double bound = std::sqrt(6.0 / fan_in);
  fill_uniform(w, rng, -bound, bound);
}

template <std::floating_point T>
Network<T> init_network(const NetworkConfig& cfg, std::uint64_t seed) {
  Network<T> net = make_network<T>(cfg);
  SplitMix64 rng(mix_seed(seed, 0x1a2b3c4d5e6f7788ull));
  auto init_block = [&](BlockParams<T>& b) {
    kaiming_fill(b.axial_h, cfg.axial_k, rng);
    kaiming_fill(b.axial_v, cfg.axial_k, rng);
    kaiming_fill(b.pw_w, b.pw_w.c(), rng);
    kaiming_fill(b.ca.squeeze_w, b.ca.squeeze_w.c(), rng);
    kaiming_fill(b.ca.excite_w, b.ca.excite_w.c(), rng);
  };
  for (auto& b : net.encoders) init_block(b);
  for (auto& b : net.decoders) init_block(b);
  kaiming_fill(net.head_w, net.head_w.c(), rng);
  return net;
}

// ---------------------------------------------------------------------------
// Plain (inference) forward path.
// ---------------------------------------------------------------------------

/// w0 = avgpool(x); w = sigmoid(excite(relu(squeeze(w0)))); out = w * x.
template <std::floating_point T>
Tensor4<T> calayer(const Tensor4<T>& x, const CALayerParams<T>& ca) {
  Tensor4<T> w0 = ops::global_avg_pool_fwd(x);
  Tensor4<T> hid = ops::activation_fwd(ops::pointwise_fwd(w0, ca.squeeze_w, &ca.squeeze_b), ActivationKind::relu);
  Tensor4<T> gate =
      ops::activation_fwd(ops::pointwise_fwd(hid, ca.excite_w, &ca.excite_b), ActivationKind::sigmoid);
  return ops::bcast_mul_fwd(x, gate);
}

template <std::floating_point T>
Tensor4<T> encoder_block(const Tensor4<T>& x, const BlockParams<T>& b, ActivationKind act) {
  Tensor4<T> t = ops::axial_depthwise_fwd(x, b.axial_h, b.axial_v);
  t = ops::pointwise_fwd(t, b.pw_w, &b.pw_b);
  t = ops::activation_fwd(t, act);
  return calayer(t, b.ca);
}

template <std::floating_point T>
Tensor4<T> decoder_block(const Tensor4<T>& from_below, const Tensor4<T>& skip, const BlockParams<T>& b,
                         ActivationKind act) {
  Tensor4<T> up = ops::upsample_bilinear2_fwd(from_below);
  if (up.h() != skip.h() || up.w() != skip.w())
    throw ShapeError(strcat_("decoder_block: upsampled input ", up.dims().str(), " does not match skip ",
                             skip.dims().str()));
  Tensor4<T> cat = ops::concat_channels_fwd(up, skip);
  Tensor4<T> t = ops::axial_depthwise_fwd(cat, b.axial_h, b.axial_v);
  t = ops::pointwise_fwd(t, b.pw_w, &b.pw_b);
  t = ops::activation_fwd(t, act);
  return calayer(t, b.ca);
}

template <std::floating_point T>
void check_forward_input(const NetworkConfig& cfg, const Dims4& d) {
  if (d.c != cfg.input_channels)
    throw ShapeError(strcat_("forward: batch ", d.str(), " must have ", cfg.input_channels, " channels"));
  const int f = cfg.downsample_factor();
  if (d.h % f != 0 || d.w % f != 0)
    throw ShapeError(strcat_("forward: spatial dims of ", d.str(), " must be divisible by 2^", cfg.stages(), " = ",
                             f));
}

template <std::floating_point T>
Tensor4<T> forward(const Network<T>& net, const Tensor4<T>& batch) {
  const NetworkConfig& cfg = net.config;
  check_forward_input<T>(cfg, batch.dims());
  std::vector<Tensor4<T>> skips;
  Tensor4<T> x = batch;
  for (int i = 0; i < cfg.stages(); ++i) {
    Tensor4<T> e = encoder_block(x, net.encoders[static_cast<std::size_t>(i)], cfg.activation);
    x = ops::downsample_max2_fwd(e);
    skips.push_back(std::move(e));
  }
  for (int j = 0; j < cfg.stages(); ++j)
    x = decoder_block(x, skips[static_cast<std::size_t>(cfg.stages() - 1 - j)],
                      net.decoders[static_cast<std::size_t>(j)], cfg.activation);
  x = ops::pointwise_fwd(x, net.head_w, &net.head_b);
  return ops::activation_fwd(x, cfg.output_activation);
}

// ---------------------------------------------------------------------------
// Recorded (training) forward path. Mirrors the plain path kernel for
// kernel, so both produce bitwise-identical outputs.
// ---------------------------------------------------------------------------

template <std::floating_point T>
struct CAVars {
  ad::Var<T> squeeze_w, squeeze_b, excite_w, excite_b;
};

template <std::floating_point T>
struct BlockVars {
  ad::Var<T> axial_h, axial_v, pw_w, pw_b;
  CAVars<T> ca;
};

template <std::floating_point T>
struct NetworkVars {
  std::vector<BlockVars<T>> encoders, decoders;
  ad::Var<T> head_w, head_b;
};

template <std::floating_point T>
NetworkVars<T> make_network_vars(ad::Tape<T>& tape, const Network<T>& net, bool needs_grad = true) {
  NetworkVars<T> vars;
  auto block = [&](const BlockParams<T>& b) {
    BlockVars<T> v;
    v.axial_h = tape.leaf(b.axial_h, needs_grad);
    v.axial_v = tape.leaf(b.axial_v, needs_grad);
    v.pw_w = tape.leaf(b.pw_w, needs_grad);
    v.pw_b = tape.leaf(b.pw_b, needs_grad);
    v.ca.squeeze_w = tape.leaf(b.ca.squeeze_w, needs_grad);
    v.ca.squeeze_b = tape.leaf(b.ca.squeeze_b, needs_grad);
    v.ca.excite_w = tape.leaf(b.ca.excite_w, needs_grad);
    v.ca.excite_b = tape.leaf(b.ca.excite_b, needs_grad);
    return v;
  };
  for (const auto& b : net.encoders) vars.encoders.push_back(block(b));
  for (const auto& b : net.decoders) vars.decoders.push_back(block(b));
  vars.head_w = tape.leaf(net.head_w, needs_grad);
  vars.head_b = tape.leaf(net.head_b, needs_grad);
  return vars;
}

/// Visits the recorded parameter vars in exactly the visit_params order.
template <std::floating_point T, typename Fn>
void visit_vars(NetworkVars<T>& vars, Fn&& fn) {
  auto block = [&fn](const std::string& prefix, BlockVars<T>& v) {
    fn(prefix + ".axial.h", v.axial_h);
    fn(prefix + ".axial.v", v.axial_v);
    fn(prefix + ".pw.weight", v.pw_w);
    fn(prefix + ".pw.bias", v.pw_b);
    fn(prefix + ".ca.squeeze.weight", v.ca.squeeze_w);
    fn(prefix + ".ca.squeeze.bias", v.ca.squeeze_b);
    fn(prefix + ".ca.excite.weight", v.ca.excite_w);
    fn(prefix + ".ca.excite.bias", v.ca.excite_b);
  };
  for (std::size_t i = 0; i < vars.encoders.size(); ++i) block("enc" + std::to_string(i), vars.encoders[i]);
  for (std::size_t j = 0; j < vars.decoders.size(); ++j) block("dec" + std::to_string(j), vars.decoders[j]);
  fn(std::string("head.weight"), vars.head_w);
  fn(std::string("head.bias"), vars.head_b);
}

template <std::floating_point T>
ad::Var<T> calayer(ad::Var<T> x, const CAVars<T>& ca) {
  auto w0 = ad::global_avg_pool(x);
  auto hid = ad::relu(ad::pointwise(w0, ca.squeeze_w, std::optional(ca.squeeze_b)));
  auto gate = ad::sigmoid(ad::pointwise(hid, ca.excite_w, std::optional(ca.excite_b)));
  return ad::bcast_mul(x, gate);
}

template <std::floating_point T>
ad::Var<T> encoder_block(ad::Var<T> x, const BlockVars<T>& b, ActivationKind act) {
  auto t = ad::axial_depthwise(x, b.axial_h, b.axial_v);
  t = ad::pointwise(t, b.pw_w, std::optional(b.pw_b));
  t = ad::activation(t, act);
  return calayer(t, b.ca);
}

template <std::floating_point T>
ad::Var<T> decoder_block(ad::Var<T> from_below, ad::Var<T> skip, const BlockVars<T>& b, ActivationKind act) {
  auto up = ad::upsample_bilinear2(from_below);
  const auto& ud = from_below.tape->value(up).dims();
  const auto& sd = skip.tape->value(skip).dims();
  if (ud.h != sd.h || ud.w != sd.w)
    throw ShapeError(strcat_("decoder_block: upsampled input ", ud.str(), " does not match skip ", sd.str()));
  auto cat = ad::concat_channels(up, skip);
  auto t = ad::axial_depthwise(cat, b.axial_h, b.axial_v);
  t = ad::pointwise(t, b.pw_w, std::optional(b.pw_b));
  t = ad::activation(t, act);
  return calayer(t, b.ca);
}

template <std::floating_point T>
ad::Var<T> forward(ad::Tape<T>& tape, const NetworkVars<T>& vars, const NetworkConfig& cfg, ad::Var<T> batch) {
  check_forward_input<T>(cfg, tape.value(batch).dims());
  std::vector<ad::Var<T>> skips;
  ad::Var<T> x = batch;
  for (int i = 0; i < cfg.stages(); ++i) {
    auto e = encoder_block(x, vars.encoders[static_cast<std::size_t>(i)], cfg.activation);
    x = ad::downsample_max2(e);
    skips.push_back(e);
  }
  for (int j = 0; j < cfg.stages(); ++j)
    x = decoder_block(x, skips[static_cast<std::size_t>(cfg.stages() - 1 - j)],
                      vars.decoders[static_cast<std::size_t>(j)], cfg.activation);
  x = ad::pointwise(x, vars.head_w, std::optional(vars.head_b));
  return ad::activation(x, cfg.output_activation);
}

// ---------------------------------------------------------------------------
// Budget counters: exact parameter totals and multiply-accumulate counts.
// FLOPs are reported under both the 1-op and 2-ops-per-MAC conventions;
// only conv/pointwise/MLP multiplies count (pooling, activations, residual
// adds and the attention elementwise product are excluded).
// ---------------------------------------------------------------------------

template <std::floating_point T>
std::uint64_t count_params(const Network<T>& net) {
  std::uint64_t total = 0;
  visit_params(net, [&total](const std::string&, const Tensor4<T>& t) {
    total += static_cast<std::uint64_t>(t.size());
  });
  return total;
}

struct LayerBudget {
  std::string name;
  std::string shape;
  std::uint64_t params = 0;
  std::uint64_t macs = 0;  // at the requested input size
};

struct BudgetReport {
  std::vector<LayerBudget> layers;
  std::uint64_t total_params = 0;
  std::uint64_t total_macs = 0;

  std::uint64_t flops_1x() const { return total_macs; }
  std::uint64_t flops_2x() const { return 2 * total_macs; }
};

/// Walks the configured shapes at an input size without instantiating
/// parameters.
inline BudgetReport count_budget(const NetworkConfig& cfg, int height, int width) {
  cfg.validate();
  BudgetReport rep;
  auto add = [&rep](const std::string& name, const std::string& shape, std::uint64_t params, std::uint64_t macs) {
    rep.layers.push_back({name, shape, params, macs});
    rep.total_params += params;
    rep.total_macs += macs;
  };
  auto block = [&](const std::string& prefix, int cin, int cout, std::uint64_t pixels) {
    const int k = cfg.axial_k;
    const int cr = cfg.squeeze_width(cout);
    add(prefix + ".axial", strcat_("2x", cin, "x", k), std::uint64_t(2) * cin * k,
        std::uint64_t(2) * cin * k * pixels);
    add(prefix + ".pw", strcat_(cout, "x", cin, "x1x1"), std::uint64_t(cout) * cin + cout,
        std::uint64_t(cout) * cin * pixels);
    add(prefix + ".ca", strcat_(cr, "x", cout, " + ", cout, "x", cr),
        std::uint64_t(cr) * cout + cr + std::uint64_t(cout) * cr + cout, std::uint64_t(2) * cout * cr);
  };
  std::uint64_t px = std::uint64_t(height) * static_cast<std::uint64_t>(width);
  for (int i = 0; i < cfg.stages(); ++i) {
    block("enc" + std::to_string(i), cfg.encoder_in(i), cfg.encoder_out(i), px);
    px /= 4;
  }
  for (int j = 0; j < cfg.stages(); ++j) {
    px *= 4;
    block("dec" + std::to_string(j), cfg.decoder_in(j), cfg.decoder_out(j), px);
  }
  const int w0 = cfg.decoder_out(cfg.stages() - 1);
  add("head", strcat_(cfg.output_channels, "x", w0, "x1x1"),
      std::uint64_t(cfg.output_channels) * w0 + cfg.output_channels,
      std::uint64_t(cfg.output_channels) * w0 * px);
  return rep;
}

inline std::uint64_t count_flops_2x(const NetworkConfig& cfg, int height, int width) {
  return count_budget(cfg, height, width).flops_2x();
}

}  // namespace lu2net

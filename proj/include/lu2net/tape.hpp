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

#include <functional>
#include <memory>
#include <optional>
#include <type_traits>
#include <utility>
#include <vector>

#include "lu2net/ops.hpp"

namespace lu2net::ad {

template <std::floating_point T>
class Tape;

/// Handle to one recorded value on a tape.
template <std::floating_point T>
struct Var {
  Tape<T>* tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
};

/// Eager reverse-mode tape. Operations append nodes in evaluation order, so
/// node creation order is a topological order of the graph; backward() walks
/// it once in reverse, accumulating vector-Jacobian products.
template <std::floating_point T>
class Tape {
public:
  using BackFn = std::function<void(Tape&, const Tensor4<T>&)>;

  Var<T> leaf(Tensor4<T> value, bool needs_grad) {
    nodes_.push_back(Node{std::move(value), needs_grad, nullptr});
    return Var<T>{this, static_cast<int>(nodes_.size()) - 1};
  }

  Var<T> constant(Tensor4<T> value) { return leaf(std::move(value), false); }

  /// Records an interior node. back receives the accumulated gradient of
  /// this node and must route it to the parents via accumulate().
  Var<T> record(Tensor4<T> value, bool needs_grad, BackFn back) {
    nodes_.push_back(Node{std::move(value), needs_grad, needs_grad ? std::move(back) : nullptr});
    return Var<T>{this, static_cast<int>(nodes_.size()) - 1};
  }

  const Tensor4<T>& value(Var<T> v) const {
    check_var(v);
    return nodes_[static_cast<std::size_t>(v.id)].value;
  }

  bool needs_grad(Var<T> v) const {
    check_var(v);
    return nodes_[static_cast<std::size_t>(v.id)].needs_grad;
  }

  /// Seeds the root with `seed` and runs one reverse sweep. Visits every
  /// node at most once, in reverse creation order.
  void backward(Var<T> root, const Tensor4<T>& seed) {
    check_var(root);
    if (!(seed.dims() == value(root).dims()))
      throw ShapeError(strcat_("backward: seed ", seed.dims().str(), " does not match output ",
                               value(root).dims().str()));
    grads_.assign(nodes_.size(), std::nullopt);
    accumulate(root, seed);
    for (int i = root.id; i >= 0; --i) {
      auto& node = nodes_[static_cast<std::size_t>(i)];
      if (!node.back || !grads_[static_cast<std::size_t>(i)]) continue;
      node.back(*this, *grads_[static_cast<std::size_t>(i)]);
    }
    ran_backward_ = true;
  }

  /// Accumulated gradient of a recorded value. Only meaningful after
  /// backward(); missing gradients raise a lookup error.
  const Tensor4<T>& grad(Var<T> v) const {
    if (!v.valid() || v.tape != this || v.id >= static_cast<int>(nodes_.size()))
      throw LookupError("grad requested for a tensor that is not on this tape");
    if (!ran_backward_ || grads_.size() != nodes_.size() || !grads_[static_cast<std::size_t>(v.id)])
      throw LookupError(strcat_("no gradient recorded for node ", v.id));
    return *grads_[static_cast<std::size_t>(v.id)];
  }

  bool has_grad(Var<T> v) const {
    return v.valid() && v.tape == this && v.id < static_cast<int>(nodes_.size()) && ran_backward_ &&
           grads_[static_cast<std::size_t>(v.id)].has_value();
  }

  /// Adds g into the gradient slot of v (used by backward closures).
  void accumulate(Var<T> v, const Tensor4<T>& g) {
    auto& slot = grads_[static_cast<std::size_t>(v.id)];
    if (!slot) {
      slot = g;
      return;
    }
    if (!(slot->dims() == g.dims()))
      throw ShapeError(strcat_("gradient accumulation mismatch ", slot->dims().str(), " vs ", g.dims().str()));
    for (std::int64_t i = 0; i < g.size(); ++i) slot->data()[i] += g.data()[i];
  }

  std::size_t node_count() const { return nodes_.size(); }

private:
  struct Node {
    Tensor4<T> value;
    bool needs_grad;
    BackFn back;
  };

  void check_var(Var<T> v) const {
    if (!v.valid() || v.tape != this || v.id >= static_cast<int>(nodes_.size()))
      throw LookupError("tensor is not on this tape");
  }

  std::vector<Node> nodes_;
  std::vector<std::optional<Tensor4<T>>> grads_;
  bool ran_backward_ = false;
};

// ---------------------------------------------------------------------------
// Recorded operations. Forward values are computed eagerly with the ops::
// kernels; each op registers the matching vector-Jacobian product.
// ---------------------------------------------------------------------------

template <std::floating_point T>
Var<T> conv2d(Var<T> x, Var<T> w, std::optional<std::type_identity_t<Var<T>>> bias, const ConvSpec& spec) {
  Tape<T>& tp = *x.tape;
  const Tensor4<T>* bptr = bias ? &tp.value(*bias) : nullptr;
  Tensor4<T> out = ops::conv2d_fwd(tp.value(x), tp.value(w), bptr, spec);
  const bool ng = tp.needs_grad(x) || tp.needs_grad(w) || (bias && tp.needs_grad(*bias));
  return tp.record(std::move(out), ng, [x, w, bias, spec](Tape<T>& t, const Tensor4<T>& g) {
    if (t.needs_grad(x)) t.accumulate(x, ops::conv2d_bwd_input(g, t.value(w), spec, t.value(x).dims()));
    if (t.needs_grad(w)) t.accumulate(w, ops::conv2d_bwd_weights(g, t.value(x), spec));
    if (bias && t.needs_grad(*bias)) t.accumulate(*bias, ops::sum_bias_grad(g));
  });
}

template <std::floating_point T>
Var<T> axial_depthwise(Var<T> x, Var<T> hk, Var<T> vk) {
  Tape<T>& tp = *x.tape;
  Tensor4<T> out = ops::axial_depthwise_fwd(tp.value(x), tp.value(hk), tp.value(vk));
  const bool ng = tp.needs_grad(x) || tp.needs_grad(hk) || tp.needs_grad(vk);
  return tp.record(std::move(out), ng, [x, hk, vk](Tape<T>& t, const Tensor4<T>& g) {
    if (t.needs_grad(x)) t.accumulate(x, ops::axial_depthwise_bwd_input(g, t.value(hk), t.value(vk)));
    if (t.needs_grad(hk) || t.needs_grad(vk)) {
      Tensor4<T> gh, gv;
      ops::axial_depthwise_bwd_kernels(g, t.value(x), t.value(hk), t.value(vk), gh, gv);
      if (t.needs_grad(hk)) t.accumulate(hk, gh);
      if (t.needs_grad(vk)) t.accumulate(vk, gv);
    }
  });
}

template <std::floating_point T>
Var<T> pointwise(Var<T> x, Var<T> w, std::optional<std::type_identity_t<Var<T>>> bias) {
  Tape<T>& tp = *x.tape;
  const Tensor4<T>* bptr = bias ? &tp.value(*bias) : nullptr;
  Tensor4<T> out = ops::pointwise_fwd(tp.value(x), tp.value(w), bptr);
  const bool ng = tp.needs_grad(x) || tp.needs_grad(w) || (bias && tp.needs_grad(*bias));
  return tp.record(std::move(out), ng, [x, w, bias](Tape<T>& t, const Tensor4<T>& g) {
    if (t.needs_grad(x)) t.accumulate(x, ops::pointwise_bwd_input(g, t.value(w)));
    if (t.needs_grad(w)) t.accumulate(w, ops::pointwise_bwd_weights(g, t.value(x)));
    if (bias && t.needs_grad(*bias)) t.accumulate(*bias, ops::sum_bias_grad(g));
  });
}

template <std::floating_point T>
Var<T> global_avg_pool(Var<T> x) {
  Tape<T>& tp = *x.tape;
  Tensor4<T> out = ops::global_avg_pool_fwd(tp.value(x));
  return tp.record(std::move(out), tp.needs_grad(x), [x](Tape<T>& t, const Tensor4<T>& g) {
    t.accumulate(x, ops::global_avg_pool_bwd(g, t.value(x).dims()));
  });
}

template <std::floating_point T>
Var<T> downsample_max2(Var<T> x) {
  Tape<T>& tp = *x.tape;
  auto argmax = std::make_shared<std::vector<std::uint8_t>>();
  Tensor4<T> out = ops::downsample_max2_fwd(tp.value(x), argmax.get());
  return tp.record(std::move(out), tp.needs_grad(x), [x, argmax](Tape<T>& t, const Tensor4<T>& g) {
    t.accumulate(x, ops::downsample_max2_bwd(g, *argmax, t.value(x).dims()));
  });
}

template <std::floating_point T>
Var<T> upsample_bilinear2(Var<T> x) {
  Tape<T>& tp = *x.tape;
  Tensor4<T> out = ops::upsample_bilinear2_fwd(tp.value(x));
  return tp.record(std::move(out), tp.needs_grad(x), [x](Tape<T>& t, const Tensor4<T>& g) {
    t.accumulate(x, ops::upsample_bilinear2_bwd(g, t.value(x).dims()));
  });
}

template <std::floating_point T>
Var<T> concat_channels(Var<T> a, Var<T> b) {
  Tape<T>& tp = *a.tape;
  Tensor4<T> out = ops::concat_channels_fwd(tp.value(a), tp.value(b));
  const bool ng = tp.needs_grad(a) || tp.needs_grad(b);
  return tp.record(std::move(out), ng, [a, b](Tape<T>& t, const Tensor4<T>& g) {
    const int ca = t.value(a).c();
    if (t.needs_grad(a)) t.accumulate(a, ops::slice_channels(g, 0, ca));
    if (t.needs_grad(b)) t.accumulate(b, ops::slice_channels(g, ca, g.c()));
  });
}

/// The backward uses the saved output (cheaper than the input for
/// sigmoid/tanh; for relu the out>0 mask equals the x>0 mask).
template <std::floating_point T>
Var<T> activation(Var<T> x, ActivationKind kind) {
  Tape<T>& tp = *x.tape;
  auto saved = std::make_shared<Tensor4<T>>(ops::activation_fwd(tp.value(x), kind));
  Tensor4<T> out = *saved;
  return tp.record(std::move(out), tp.needs_grad(x), [x, kind, saved](Tape<T>& t, const Tensor4<T>& g) {
    t.accumulate(x, ops::activation_bwd(g, *saved, kind));
  });
}

template <std::floating_point T>
Var<T> relu(Var<T> x) { return activation(x, ActivationKind::relu); }
template <std::floating_point T>
Var<T> sigmoid(Var<T> x) { return activation(x, ActivationKind::sigmoid); }
template <std::floating_point T>
Var<T> tanh_op(Var<T> x) { return activation(x, ActivationKind::tanh); }

template <std::floating_point T>
Var<T> add(Var<T> a, Var<T> b) {
  Tape<T>& tp = *a.tape;
  Tensor4<T> out = ops::add_fwd(tp.value(a), tp.value(b));
  const bool ng = tp.needs_grad(a) || tp.needs_grad(b);
  return tp.record(std::move(out), ng, [a, b](Tape<T>& t, const Tensor4<T>& g) {
    if (t.needs_grad(a)) t.accumulate(a, g);
    if (t.needs_grad(b)) t.accumulate(b, g);
  });
}

template <std::floating_point T>
Var<T> sub(Var<T> a, Var<T> b) {
  Tape<T>& tp = *a.tape;
  Tensor4<T> out = ops::sub_fwd(tp.value(a), tp.value(b));
  const bool ng = tp.needs_grad(a) || tp.needs_grad(b);
  return tp.record(std::move(out), ng, [a, b](Tape<T>& t, const Tensor4<T>& g) {
    if (t.needs_grad(a)) t.accumulate(a, g);
    if (t.needs_grad(b)) {
      Tensor4<T> neg(g.dims());
      for (std::int64_t i = 0; i < g.size(); ++i) neg.data()[i] = -g.data()[i];
      t.accumulate(b, neg);
    }
  });
}

template <std::floating_point T>
Var<T> mul(Var<T> a, Var<T> b) {
  Tape<T>& tp = *a.tape;
  Tensor4<T> out = ops::mul_fwd(tp.value(a), tp.value(b));
  const bool ng = tp.needs_grad(a) || tp.needs_grad(b);
  return tp.record(std::move(out), ng, [a, b](Tape<T>& t, const Tensor4<T>& g) {
    if (t.needs_grad(a)) t.accumulate(a, ops::mul_fwd(g, t.value(b)));
    if (t.needs_grad(b)) t.accumulate(b, ops::mul_fwd(g, t.value(a)));
  });
}

template <std::floating_point T>
Var<T> scalar_affine(Var<T> x, T a, T b) {
  Tape<T>& tp = *x.tape;
  Tensor4<T> out = ops::scalar_affine_fwd(tp.value(x), a, b);
  return tp.record(std::move(out), tp.needs_grad(x), [x, a](Tape<T>& t, const Tensor4<T>& g) {
    t.accumulate(x, ops::scalar_affine_fwd(g, a, T{0}));
  });
}

template <std::floating_point T>
Var<T> channel_scale(Var<T> x, std::vector<T> scale) {
  Tape<T>& tp = *x.tape;
  auto s = std::make_shared<std::vector<T>>(std::move(scale));
  Tensor4<T> out = ops::channel_scale_fwd(tp.value(x), *s);
  return tp.record(std::move(out), tp.needs_grad(x), [x, s](Tape<T>& t, const Tensor4<T>& g) {
    t.accumulate(x, ops::channel_scale_fwd(g, *s));
  });
}

template <std::floating_point T>
Var<T> bcast_mul(Var<T> x, Var<T> gate) {
  Tape<T>& tp = *x.tape;
  Tensor4<T> out = ops::bcast_mul_fwd(tp.value(x), tp.value(gate));
  const bool ng = tp.needs_grad(x) || tp.needs_grad(gate);
  return tp.record(std::move(out), ng, [x, gate](Tape<T>& t, const Tensor4<T>& g) {
    if (t.needs_grad(x)) t.accumulate(x, ops::bcast_mul_fwd(g, t.value(gate)));
    if (t.needs_grad(gate)) t.accumulate(gate, ops::bcast_mul_bwd_gate(g, t.value(x)));
  });
}

template <std::floating_point T>
Var<T> mean_all(Var<T> x) {
  Tape<T>& tp = *x.tape;
  Tensor4<T> out = ops::mean_all_fwd(tp.value(x));
  return tp.record(std::move(out), tp.needs_grad(x), [x](Tape<T>& t, const Tensor4<T>& g) {
    const Dims4 d = t.value(x).dims();
    const T gv = g.data()[0] / static_cast<T>(d.count());
    t.accumulate(x, Tensor4<T>::full(d, gv));
  });
}

template <std::floating_point T>
Var<T> sum_all(Var<T> x) {
  Tape<T>& tp = *x.tape;
  Tensor4<T> out = ops::sum_all_fwd(tp.value(x));
  return tp.record(std::move(out), tp.needs_grad(x), [x](Tape<T>& t, const Tensor4<T>& g) {
    t.accumulate(x, Tensor4<T>::full(t.value(x).dims(), g.data()[0]));
  });
}

/// Clamp to [0,1]; gradient passes where 0 <= x <= 1 (right-derivative at 0,
/// left-derivative at 1).
template <std::floating_point T>
Var<T> clamp01(Var<T> x) {
  Tape<T>& tp = *x.tape;
  Tensor4<T> out = ops::clamp01_fwd(tp.value(x));
  return tp.record(std::move(out), tp.needs_grad(x), [x](Tape<T>& t, const Tensor4<T>& g) {
    const Tensor4<T>& xv = t.value(x);
    Tensor4<T> gx(g.dims());
    for (std::int64_t i = 0; i < g.size(); ++i) {
      const T v = xv.data()[i];
      gx.data()[i] = (v >= T{0} && v <= T{1}) ? g.data()[i] : T{0};
    }
    t.accumulate(x, gx);
  });
}

/// Elementwise wrapped angular difference wrap(a-b) in (-pi, pi]; the
/// derivative is +1 / -1 almost everywhere.
template <std::floating_point T>
Var<T> angle_diff(Var<T> a, Var<T> b) {
  Tape<T>& tp = *a.tape;
  ops::check_same_dims(tp.value(a), tp.value(b), "angle_diff");
  const Tensor4<T>& av = tp.value(a);
  const Tensor4<T>& bv = tp.value(b);
  Tensor4<T> out(av.dims());
  constexpr T pi = static_cast<T>(3.14159265358979323846L);
  for (std::int64_t i = 0; i < av.size(); ++i) {
    T d = av.data()[i] - bv.data()[i];
    while (d > pi) d -= 2 * pi;
    while (d <= -pi) d += 2 * pi;
    out.data()[i] = d;
  }
  const bool ng = tp.needs_grad(a) || tp.needs_grad(b);
  return tp.record(std::move(out), ng, [a, b](Tape<T>& t, const Tensor4<T>& g) {
    if (t.needs_grad(a)) t.accumulate(a, g);
    if (t.needs_grad(b)) {
      Tensor4<T> neg(g.dims());
      for (std::int64_t i = 0; i < g.size(); ++i) neg.data()[i] = -g.data()[i];
      t.accumulate(b, neg);
    }
  });
}

// ---------------------------------------------------------------------------
// Gradient checking: analytic reverse-mode gradient vs central finite
// differences, componentwise relative error with a max(|a|,|b|,1e-8) floor.
// ---------------------------------------------------------------------------

template <std::floating_point T>
struct GradCheckReport {
  T max_rel_err = 0;
  std::int64_t worst_index = -1;
};

/// build must map (tape, input var) to a scalar (1x1x1x1) var using only
/// recorded operations. Inputs should sit away from the kinks of any
/// piecewise-defined operation by more than the finite-difference step.
template <std::floating_point T, typename BuildFn>
GradCheckReport<T> grad_check(BuildFn&& build, const Tensor4<T>& input, T step) {
  if (!(step > T{0})) throw ConfigError("grad_check: step must be positive");

  auto eval = [&](const Tensor4<T>& x) -> T {
    Tape<T> tape;
    Var<T> in = tape.leaf(x, false);
    Var<T> out = build(tape, in);
    const Tensor4<T>& v = tape.value(out);
    if (!(v.dims() == Dims4{1, 1, 1, 1}))
      throw ShapeError(strcat_("grad_check: build must produce a scalar, got ", v.dims().str()));
    const T y = v.data()[0];
    if (!std::isfinite(y)) throw NumericError("grad_check: non-finite function value");
    return y;
  };

  // analytic gradient
  Tensor4<T> analytic(input.dims());
  {
    Tape<T> tape;
    Var<T> in = tape.leaf(input, true);
    Var<T> out = build(tape, in);
    Tensor4<T> seed(Dims4{1, 1, 1, 1});
    seed.data()[0] = T{1};
    tape.backward(out, seed);
    analytic = tape.grad(in);
    if (!analytic.all_finite()) throw NumericError("grad_check: non-finite analytic gradient");
  }

  GradCheckReport<T> rep;
  Tensor4<T> probe = input;
  for (std::int64_t i = 0; i < input.size(); ++i) {
    const T saved = probe.data()[i];
    probe.data()[i] = saved + step;
    const T fp = eval(probe);
    probe.data()[i] = saved - step;
    const T fm = eval(probe);
    probe.data()[i] = saved;
    const T fd = (fp - fm) / (2 * step);
    if (!std::isfinite(fd)) throw NumericError("grad_check: non-finite finite-difference value");
    const T a = analytic.data()[i];
    const T denom = std::max({std::abs(a), std::abs(fd), static_cast<T>(1e-8)});
    const T rel = std::abs(a - fd) / denom;
    if (rel > rep.max_rel_err) {
      rep.max_rel_err = rel;
      rep.worst_index = i;
    }
  }
  return rep;
}

}  // namespace lu2net::ad

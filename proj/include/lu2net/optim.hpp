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

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "lu2net/network.hpp"

namespace lu2net::optim {

/// Training recipe: Adam with step decay, 150 epochs, initial rate 5e-4
/// multiplied by 0.8 every 40 epochs.
struct TrainConfig {
  int epochs = 150;
  double lr0 = 0.0005;
  double decay_factor = 0.8;
  int decay_every = 40;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  int batch_size = 8;
  int checkpoint_every = 0;  // epochs between periodic checkpoints; 0 = final only
  int eval_every = 1;        // epochs between test-split evaluations; 0 = never
  double grad_clip = 0.0;    // global-norm clip; 0 = off
  std::uint64_t seed = 1;

  void validate() const {
    if (epochs < 0) throw ConfigError(strcat_("epochs must be >= 0, got ", epochs));
    if (!(lr0 > 0)) throw ConfigError("lr0 must be positive");
    if (!(beta1 >= 0 && beta1 < 1) || !(beta2 >= 0 && beta2 < 1))
      throw ConfigError("Adam betas must lie in [0,1)");
    if (!(eps > 0)) throw ConfigError("Adam eps must be positive");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1");
    if (decay_every < 1) throw ConfigError("decay_every must be >= 1");
  }
};

/// lr0 * factor^floor(epoch / every): piecewise constant, non-increasing.
inline double lr_at(int epoch, const TrainConfig& cfg) {
  if (epoch < 0) throw ConfigError(strcat_("epoch must be >= 0, got ", epoch));
  return cfg.lr0 * std::pow(cfg.decay_factor, static_cast<double>(epoch / cfg.decay_every));
}

/// First and second moment estimates mirroring the parameter shapes.
template <std::floating_point T>
struct AdamState {
  std::vector<Tensor4<T>> m;
  std::vector<Tensor4<T>> v;
  std::uint64_t t = 0;
};

template <std::floating_point T>
AdamState<T> make_adam_state(const Network<T>& net) {
  AdamState<T> st;
  visit_params(net, [&st](const std::string&, const Tensor4<T>& p) {
    st.m.emplace_back(p.dims());
    st.v.emplace_back(p.dims());
  });
  return st;
}

/// One bias-corrected Adam update over all parameters, in visit order.
/// A non-finite gradient aborts the step before any parameter changes.
template <std::floating_point T>
void adam_step(std::vector<Tensor4<T>*>& params, const std::vector<const Tensor4<T>*>& grads,
               const std::vector<std::string>& names, AdamState<T>& state, double lr, const TrainConfig& cfg) {
  if (params.size() != grads.size() || params.size() != state.m.size())
    throw ShapeError(strcat_("adam_step: ", params.size(), " params vs ", grads.size(), " grads vs ",
                             state.m.size(), " moment slots"));
  if (!(lr > 0)) throw ConfigError("adam_step: lr must be positive");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!(params[i]->dims() == grads[i]->dims()))
      throw ShapeError(strcat_("adam_step: ", names[i], " grad ", grads[i]->dims().str(), " vs param ",
                               params[i]->dims().str()));
    if (!grads[i]->all_finite())
      throw NumericError(strcat_("adam_step: non-finite gradient for parameter '", names[i], "'"));
  }

  double clip_scale = 1.0;
  if (cfg.grad_clip > 0) {
    double sq = 0;
    for (const auto* g : grads)
      for (std::int64_t j = 0; j < g->size(); ++j) sq += static_cast<double>(g->data()[j]) * g->data()[j];
    const double norm = std::sqrt(sq);
    if (norm > cfg.grad_clip) clip_scale = cfg.grad_clip / norm;
  }

  state.t += 1;
  const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Tensor4<T>& p = *params[i];
    const Tensor4<T>& g = *grads[i];
    Tensor4<T>& m = state.m[i];
    Tensor4<T>& v = state.v[i];
    for (std::int64_t j = 0; j < p.size(); ++j) {
      const T gj = static_cast<T>(clip_scale) * g.data()[j];
      m.data()[j] = static_cast<T>(cfg.beta1) * m.data()[j] + static_cast<T>(1 - cfg.beta1) * gj;
      v.data()[j] = static_cast<T>(cfg.beta2) * v.data()[j] + static_cast<T>(1 - cfg.beta2) * gj * gj;
      const double mh = static_cast<double>(m.data()[j]) / bc1;
      const double vh = static_cast<double>(v.data()[j]) / bc2;
      p.data()[j] -= static_cast<T>(lr * mh / (std::sqrt(vh) + cfg.eps));
    }
  }
}

}  // namespace lu2net::optim

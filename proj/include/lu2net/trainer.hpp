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

#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "lu2net/checkpoint.hpp"
#include "lu2net/dataset.hpp"
#include "lu2net/loss.hpp"
#include "lu2net/optim.hpp"

namespace lu2net::train {

struct EpochRow {
  int epoch = 0;
  double lr = 0;
  double l_rgb = 0, l_lab = 0, l_lch = 0, l_ssim = 0;
  double total = 0;
  double test_psnr = std::numeric_limits<double>::quiet_NaN();
  double test_ssim = std::numeric_limits<double>::quiet_NaN();
};

struct TrainResult {
  std::vector<EpochRow> epochs;
  std::vector<loss::LossReport> steps;  // one per optimizer step, in order
  std::string final_checkpoint;         // empty if nothing was written
  bool halted = false;
  std::string halt_reason;
};

inline void write_epoch_csv(const std::string& path, const std::vector<EpochRow>& rows) {
  std::ofstream f(path);
  if (!f) throw IoError(strcat_("cannot open ", path, " for writing"));
  f << "epoch,lr,l_rgb,l_lab,l_lch,l_ssim,total,test_psnr,test_ssim\n";
  f.precision(10);
  for (const auto& r : rows)
    f << r.epoch << "," << r.lr << "," << r.l_rgb << "," << r.l_lab << "," << r.l_lch << "," << r.l_ssim << ","
      << r.total << "," << r.test_psnr << "," << r.test_ssim << "\n";
}

// ---------------------------------------------------------------------------
// Training-state checkpoints: network entries plus name-prefixed optimizer
// moments and run counters, all in the standard checkpoint format.
// ---------------------------------------------------------------------------

template <std::floating_point T>
void save_train_state(const Network<T>& net, const optim::AdamState<T>& state, int next_epoch,
                      std::uint64_t seed, const std::string& path) {
  auto entries = ckpt::network_entries(net);
  std::size_t slot = 0;
  visit_params(net, [&](const std::string& name, const Tensor4<T>&) {
    entries.push_back(ckpt::detail::tensor_entry("adam.m." + name, state.m[slot]));
    entries.push_back(ckpt::detail::tensor_entry("adam.v." + name, state.v[slot]));
    ++slot;
  });
  entries.push_back(ckpt::detail::scalar_entry("opt.step", static_cast<float>(state.t)));
  entries.push_back(ckpt::detail::scalar_entry("run.epoch_next", static_cast<float>(next_epoch)));
  entries.push_back(ckpt::detail::scalar_entry("run.seed", static_cast<float>(seed)));
  ckpt::write_checkpoint(path, entries);
}

template <std::floating_point T>
struct TrainState {
  Network<T> net;
  optim::AdamState<T> state;
  int next_epoch = 0;
  std::uint64_t seed = 0;
};

template <std::floating_point T>
TrainState<T> load_train_state(const std::string& path) {
  const auto entries = ckpt::read_checkpoint(path);
  TrainState<T> ts;
  ts.net = ckpt::load_network<T>(path);
  ts.state = optim::make_adam_state(ts.net);
  std::size_t slot = 0;
  visit_params(ts.net, [&](const std::string& name, const Tensor4<T>&) {
    for (const char* kind : {"m", "v"}) {
      const auto* e = ckpt::find_entry(entries, strcat_("adam.", kind, ".", name));
      if (!e) throw IoError(strcat_(path, ": missing optimizer tensor adam.", kind, ".", name));
      Tensor4<T>& dst = kind[0] == 'm' ? ts.state.m[slot] : ts.state.v[slot];
      if (e->element_count() != static_cast<std::uint64_t>(dst.size()))
        throw IoError(strcat_(path, ": optimizer tensor size mismatch for ", name));
      for (std::int64_t j = 0; j < dst.size(); ++j) dst.data()[j] = static_cast<T>(e->data[static_cast<std::size_t>(j)]);
    }
    ++slot;
  });
  ts.state.t = static_cast<std::uint64_t>(ckpt::scalar_of(entries, "opt.step", path));
  ts.next_epoch = static_cast<int>(ckpt::scalar_of(entries, "run.epoch_next", path));
  ts.seed = static_cast<std::uint64_t>(ckpt::scalar_of(entries, "run.seed", path));
  return ts;
}

// ---------------------------------------------------------------------------
// The epoch loop.
// ---------------------------------------------------------------------------

template <std::floating_point T>
struct EvalSummary {
  double mean_psnr = std::numeric_limits<double>::quiet_NaN();
  double mean_ssim = std::numeric_limits<double>::quiet_NaN();
};

/// Mean PSNR/SSIM of plain forward outputs against ground truth over the
/// given members, both compared in [0,1].
template <std::floating_point T>
EvalSummary<T> evaluate_split(const Network<T>& net, data::PairCache<T>& cache,
                              const std::vector<std::size_t>& members,
                              const metrics::SsimParams& ssim_params = {}) {
  EvalSummary<T> s;
  if (members.empty()) return s;
  double psnr_sum = 0, ssim_sum = 0;
  for (std::size_t idx : members) {
    const auto& pair = cache.get(idx);
    Tensor4<T> out01 = img::denormalize(forward(net, pair.input));
    Tensor4<T> gt01 = img::denormalize(pair.gt);
    psnr_sum += metrics::psnr(out01, gt01);
    ssim_sum += metrics::ssim_mean(out01, gt01, ssim_params);
  }
  s.mean_psnr = psnr_sum / static_cast<double>(members.size());
  s.mean_ssim = ssim_sum / static_cast<double>(members.size());
  return s;
}

/// Runs the optimization loop over the train split. Mutates `net` and
/// `state` in place; logs one row per epoch and one report per step;
/// checkpoints per cadence and at the end. A non-finite loss halts the run
/// with the last written checkpoint retained.
template <std::floating_point T>
TrainResult train(Network<T>& net, optim::AdamState<T>& state, const data::PairedDataset& ds,
                  const data::Split& split, const loss::LossConfig& loss_cfg, const optim::TrainConfig& cfg,
                  const std::string& out_dir, int start_epoch = 0,
                  const loss::FeatureExtractor<T>* extractor = nullptr) {
  cfg.validate();
  loss_cfg.validate();
  if (split.train.empty()) throw ConfigError("train split is empty");
  std::filesystem::create_directories(out_dir);

  data::PairCache<T> cache(ds);
  TrainResult result;
  const std::string ckpt_path = (std::filesystem::path(out_dir) / "checkpoint.lu2n").string();

  auto write_ckpt = [&](int next_epoch) {
    save_train_state(net, state, next_epoch, cfg.seed, ckpt_path);
    result.final_checkpoint = ckpt_path;
  };

  std::vector<std::string> names;
  std::vector<Tensor4<T>*> param_ptrs;
  visit_params(net, [&](const std::string& name, Tensor4<T>& t) {
    names.push_back(name);
    param_ptrs.push_back(&t);
  });

  for (int epoch = start_epoch; epoch < cfg.epochs; ++epoch) {
    const double lr = optim::lr_at(epoch, cfg);
    const auto batches = data::make_batches(split.train, cfg.batch_size, mix_seed(cfg.seed, 0x9000 + epoch));
    double sums[5] = {0, 0, 0, 0, 0};
    std::size_t steps_this_epoch = 0;

    for (const auto& members : batches) {
      auto [in, gt] = data::assemble_batch(cache, members, ds.target_size);
      ad::Tape<T> tape;
      auto vars = make_network_vars(tape, net, true);
      auto out = forward(tape, vars, net.config, tape.constant(std::move(in)));
      auto tl = loss::total_loss(out, tape.constant(std::move(gt)), loss_cfg, extractor);
      if (!std::isfinite(tl.report.total)) {
        result.halted = true;
        result.halt_reason = strcat_("non-finite loss at epoch ", epoch, " (last good checkpoint ",
                                     result.final_checkpoint.empty() ? "none" : result.final_checkpoint, ")");
        write_epoch_csv((std::filesystem::path(out_dir) / "epochs.csv").string(), result.epochs);
        return result;
      }
      Tensor4<T> seed_t(Dims4{1, 1, 1, 1});
      seed_t.data()[0] = T{1};
      tape.backward(tl.total, seed_t);

      std::vector<Tensor4<T>> grad_store;
      grad_store.reserve(param_ptrs.size());
      visit_vars(vars, [&](const std::string&, ad::Var<T>& v) {
        grad_store.push_back(tape.has_grad(v) ? tape.grad(v) : Tensor4<T>(tape.value(v).dims()));
      });
      std::vector<const Tensor4<T>*> grad_ptrs;
      for (const auto& g : grad_store) grad_ptrs.push_back(&g);
      optim::adam_step(param_ptrs, grad_ptrs, names, state, lr, cfg);

      result.steps.push_back(tl.report);
      sums[0] += tl.report.l_rgb;
      sums[1] += tl.report.l_lab;
      sums[2] += tl.report.l_lch;
      sums[3] += tl.report.l_ssim;
      sums[4] += tl.report.total;
      ++steps_this_epoch;
    }

    EpochRow row;
    row.epoch = epoch;
    row.lr = lr;
    if (steps_this_epoch > 0) {
      const double inv = 1.0 / static_cast<double>(steps_this_epoch);
      row.l_rgb = sums[0] * inv;
      row.l_lab = sums[1] * inv;
      row.l_lch = sums[2] * inv;
      row.l_ssim = sums[3] * inv;
      row.total = sums[4] * inv;
    }
    if (cfg.eval_every > 0 && ((epoch - start_epoch) % cfg.eval_every == 0 || epoch + 1 == cfg.epochs)) {
      const auto ev = evaluate_split(net, cache, split.test, loss_cfg.ssim);
      row.test_psnr = ev.mean_psnr;
      row.test_ssim = ev.mean_ssim;
    }
    result.epochs.push_back(row);

    if (cfg.checkpoint_every > 0 && (epoch + 1) % cfg.checkpoint_every == 0) write_ckpt(epoch + 1);
  }

  write_ckpt(cfg.epochs);
  write_epoch_csv((std::filesystem::path(out_dir) / "epochs.csv").string(), result.epochs);
  return result;
}

/// Convenience wrapper: fresh optimizer state, epochs from zero.
template <std::floating_point T>
TrainResult train(Network<T>& net, const data::PairedDataset& ds, const data::Split& split,
                  const loss::LossConfig& loss_cfg, const optim::TrainConfig& cfg, const std::string& out_dir) {
  auto state = optim::make_adam_state(net);
  return train(net, state, ds, split, loss_cfg, cfg, out_dir);
}

}  // namespace lu2net::train

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

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>

#include "lu2net/lu2net.hpp"

namespace fs = std::filesystem;
using namespace lu2net;

namespace {

struct Shape {
  int h = 256;
  int w = 256;
};

Shape parse_shape(const std::string& s) {
  const auto x = s.find('x');
  if (x == std::string::npos) throw ConfigError(strcat_("--shape expects HxW (e.g. 256x256), got '", s, "'"));
  try {
    Shape sh;
    sh.h = std::stoi(s.substr(0, x));
    sh.w = std::stoi(s.substr(x + 1));
    if (sh.h < 1 || sh.w < 1) throw std::invalid_argument("");
    return sh;
  } catch (...) {
    throw ConfigError(strcat_("--shape expects HxW (e.g. 256x256), got '", s, "'"));
  }
}

void add_common_manifest_fields(manifest::RunManifest& m) {
  m.add("build", manifest::build_id());
  m.add("hardware", manifest::hardware_description());
  m.add("timestamp", manifest::timestamp_utc());
  m.add_value("threads", runtime::thread_count());
}

void warn_unmatched(const data::PairedDataset& ds) {
  if (ds.report.clean()) return;
  std::cerr << "warning: " << ds.report.inputs_without_gt.size() << " input file(s) without ground truth, "
            << ds.report.gts_without_input.size() << " ground-truth file(s) without input\n";
  for (const auto& n : ds.report.inputs_without_gt) std::cerr << "  input-only: " << n << "\n";
  for (const auto& n : ds.report.gts_without_input) std::cerr << "  gt-only:    " << n << "\n";
}

int cmd_train(const std::string& data_root, const std::string& config_path, const std::string& out_dir,
              std::uint64_t seed, int epochs, int batch, bool have_seed, bool have_epochs, bool have_batch) {
  NetworkConfig net_cfg;
  optim::TrainConfig train_cfg;
  loss::LossConfig loss_cfg;
  config::DataConfig data_cfg;
  if (!config_path.empty()) {
    const auto ini = config::parse_ini_file(config_path);
    config::apply_network(ini, net_cfg, config_path);
    config::apply_train(ini, train_cfg, config_path);
    config::apply_loss(ini, loss_cfg, config_path);
    config::apply_data(ini, data_cfg, config_path);
  }
  if (have_seed) train_cfg.seed = seed;
  if (have_epochs) train_cfg.epochs = epochs;
  if (have_batch) train_cfg.batch_size = batch;
  net_cfg.validate();
  train_cfg.validate();

  auto ds = data::open_paired_dataset(data_root, data_cfg.target_size);
  warn_unmatched(ds);
  auto split = data::split_dataset(ds, data_cfg.split_ratio, data_cfg.split_seed);
  std::cout << "dataset: " << ds.size() << " pairs (" << split.train.size() << " train / " << split.test.size()
            << " test)\n";

  loss::FeatureExtractor<float> extractor;
  const loss::FeatureExtractor<float>* ext_ptr = nullptr;
  if (loss_cfg.use_vgg) {
    if (loss_cfg.vgg_weights.empty())
      throw ConfigError(
          "perceptual term is enabled but loss.vgg_weights is unset; provide an extractor checkpoint or disable "
          "use_vgg");
    extractor = loss::load_extractor<float>(loss_cfg.vgg_weights);
    ext_ptr = &extractor;
  }

  auto net = init_network<float>(net_cfg, train_cfg.seed);
  auto state = optim::make_adam_state(net);
  const auto t0 = std::chrono::steady_clock::now();
  auto result = train::train(net, state, ds, split, loss_cfg, train_cfg, out_dir, 0, ext_ptr);
  const auto t1 = std::chrono::steady_clock::now();
  const double secs = std::chrono::duration<double>(t1 - t0).count();

  manifest::RunManifest m("train");
  add_common_manifest_fields(m);
  m.add("data_root", data_root);
  m.add_value("pairs", ds.size());
  m.add_value("train_pairs", split.train.size());
  m.add_value("test_pairs", split.test.size());
  m.add_value("seed", train_cfg.seed);
  m.add_value("steps", result.steps.size());
  m.add_value("train_seconds", secs);
  m.add("checkpoint", result.final_checkpoint.empty() ? "none" : result.final_checkpoint);
  m.add("epoch_log", (fs::path(out_dir) / "epochs.csv").string());
  if (result.halted) m.add("halted", result.halt_reason);
  m.add_block("config", config::dump_config(net_cfg, train_cfg, loss_cfg, data_cfg));
  m.write((fs::path(out_dir) / "manifest.txt").string());

  if (result.halted) {
    std::cerr << "training halted: " << result.halt_reason << "\n";
    return 1;
  }
  std::cout << "trained " << result.steps.size() << " steps in " << secs << " s\n";
  if (!result.epochs.empty()) {
    const auto& last = result.epochs.back();
    std::cout << "final epoch " << last.epoch << ": total " << last.total << " test_psnr " << last.test_psnr
              << " test_ssim " << last.test_ssim << "\n";
  }
  std::cout << "checkpoint: " << result.final_checkpoint << "\n";
  return 0;
}

int cmd_enhance(const std::string& weights, const std::string& in_path, const std::string& out_dir, int resize_to) {
  auto net = ckpt::load_network<float>(weights);
  const auto inputs = pipeline::collect_inputs(in_path);
  const auto stats = pipeline::enhance_paths(net, inputs, out_dir, resize_to);

  manifest::RunManifest m("enhance");
  add_common_manifest_fields(m);
  m.add("weights", weights);
  m.add("input", in_path);
  m.add_value("frames", stats.processed);
  m.add_value("failed", stats.failures.size());
  m.add_value("ms_per_frame_mean", stats.mean_ms);
  m.add_value("ms_per_frame_p50", stats.p50_ms);
  m.add_value("ms_per_frame_p95", stats.p95_ms);
  m.write((fs::path(out_dir) / "manifest.txt").string());

  std::cout << "enhanced " << stats.processed << "/" << inputs.size() << " image(s), mean " << stats.mean_ms
            << " ms/frame (p95 " << stats.p95_ms << " ms)\n";
  for (const auto& [path, reason] : stats.failures) std::cerr << "failed: " << path << ": " << reason << "\n";
  return stats.failures.empty() ? 0 : 1;
}

int cmd_eval(const std::string& weights, const std::string& data_root, const std::string& split_name,
             const std::string& out_dir, double ratio, std::uint64_t split_seed, int target_size) {
  if (split_name != "test" && split_name != "train")
    throw ConfigError(strcat_("--split must be 'test' or 'train', got '", split_name, "'"));
  auto net = ckpt::load_network<float>(weights);
  auto ds = data::open_paired_dataset(data_root, target_size);
  warn_unmatched(ds);
  auto split = data::split_dataset(ds, ratio, split_seed);
  const auto& members = split_name == "test" ? split.test : split.train;
  if (members.empty()) throw ConfigError(strcat_("the ", split_name, " split is empty"));

  const auto records = pipeline::evaluate_pairs(net, ds, members);
  fs::create_directories(out_dir);
  const auto csv_path = (fs::path(out_dir) / "metrics.csv").string();
  metrics::write_metrics_csv(csv_path, records);

  double psnr_sum = 0, ssim_sum = 0, uciqe_sum = 0;
  for (const auto& r : records) {
    psnr_sum += r.psnr;
    ssim_sum += r.ssim;
    uciqe_sum += r.uciqe;
  }
  const double n = static_cast<double>(records.size());

  manifest::RunManifest m("eval");
  add_common_manifest_fields(m);
  m.add("weights", weights);
  m.add("data_root", data_root);
  m.add("split", split_name);
  m.add_value("images", records.size());
  m.add_value("mean_psnr", psnr_sum / n);
  m.add_value("mean_ssim", ssim_sum / n);
  m.add_value("mean_uciqe", uciqe_sum / n);
  m.add("metrics_csv", csv_path);
  m.write((fs::path(out_dir) / "manifest.txt").string());

  std::cout << "evaluated " << records.size() << " image(s): mean psnr " << psnr_sum / n << " dB, mean ssim "
            << ssim_sum / n << ", mean uciqe " << uciqe_sum / n << "\n";
  std::cout << "metrics: " << csv_path << "\n";
  return 0;
}

int cmd_bench(const std::string& weights, const std::string& shape_str, int iters, int warmup,
              const std::string& out_dir) {
  const Shape shape = parse_shape(shape_str);
  Network<float> net;
  std::string source;
  if (!weights.empty()) {
    net = ckpt::load_network<float>(weights);
    source = weights;
  } else {
    net = init_network<float>(NetworkConfig{}, 1);
    source = "default-config random init (seed 1)";
  }
  const auto rep = pipeline::bench_forward(net, shape.h, shape.w, iters, warmup);
  const auto budget = count_budget(net.config, shape.h, shape.w);

  manifest::RunManifest m("bench");
  add_common_manifest_fields(m);
  m.add("weights", source);
  m.add("shape", strcat_(shape.h, "x", shape.w));
  m.add_value("iterations", rep.iterations);
  m.add_value("warmup", rep.warmup);
  m.add_value("mean_ms", rep.mean_ms);
  m.add_value("p50_ms", rep.p50_ms);
  m.add_value("p95_ms", rep.p95_ms);
  m.add_value("fps", rep.fps);
  m.add_value("params", budget.total_params);
  m.add_value("flops_1x_macs", budget.flops_1x());
  m.add_value("flops_2x", budget.flops_2x());
  fs::create_directories(out_dir);
  m.write((fs::path(out_dir) / "manifest.txt").string());

  std::printf("shape %dx%d threads %d: mean %.3f ms  p50 %.3f ms  p95 %.3f ms  fps %.2f\n", shape.h, shape.w,
              rep.threads, rep.mean_ms, rep.p50_ms, rep.p95_ms, rep.fps);
  std::printf("params %llu  flops_1x_macs %llu  flops_2x %llu\n",
              static_cast<unsigned long long>(budget.total_params),
              static_cast<unsigned long long>(budget.flops_1x()),
              static_cast<unsigned long long>(budget.flops_2x()));
  return 0;
}

int cmd_inspect(const std::string& weights, const std::string& shape_str) {
  const Shape shape = parse_shape(shape_str);
  auto net = ckpt::load_network<float>(weights);
  const auto budget = count_budget(net.config, shape.h, shape.w);

  std::printf("%-12s %-22s %12s %16s\n", "layer", "shape", "params", "macs");
  std::uint64_t param_check = 0, macs_check = 0;
  for (const auto& row : budget.layers) {
    std::printf("%-12s %-22s %12llu %16llu\n", row.name.c_str(), row.shape.c_str(),
                static_cast<unsigned long long>(row.params), static_cast<unsigned long long>(row.macs));
    param_check += row.params;
    macs_check += row.macs;
  }
  if (param_check != budget.total_params || macs_check != budget.total_macs)
    throw NumericError("per-layer rows disagree with totals");
  std::printf("total_params %llu\n", static_cast<unsigned long long>(budget.total_params));
  std::printf("instantiated_params %llu\n", static_cast<unsigned long long>(count_params(net)));
  std::printf("flops_1x_macs %llu\n", static_cast<unsigned long long>(budget.flops_1x()));
  std::printf("flops_2x %llu\n", static_cast<unsigned long long>(budget.flops_2x()));
  std::printf("at_shape %dx%d\n", shape.h, shape.w);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"lu2net: lightweight axial-depthwise U-Net for underwater image enhancement"};
  app.require_subcommand(1);
  int threads = 1;
  app.add_option("--threads", threads, "worker threads for forward kernels")->capture_default_str();

  // train
  auto* train_cmd = app.add_subcommand("train", "train on a paired dataset");
  std::string train_data, train_config, train_out = "train_out";
  std::uint64_t train_seed = 1;
  int train_epochs = 150, train_batch = 8;
  train_cmd->add_option("--data", train_data, "dataset root with input/ and gt/")->required();
  train_cmd->add_option("--config", train_config, "config file (key = value sections)");
  train_cmd->add_option("--out", train_out, "output directory")->capture_default_str();
  auto* opt_seed = train_cmd->add_option("--seed", train_seed, "train seed");
  auto* opt_epochs = train_cmd->add_option("--epochs", train_epochs, "epoch count");
  auto* opt_batch = train_cmd->add_option("--batch", train_batch, "batch size");

  // enhance
  auto* enh_cmd = app.add_subcommand("enhance", "enhance an image file or a frame directory");
  std::string enh_weights, enh_in, enh_out = "enhanced";
  int enh_resize = 0;
  enh_cmd->add_option("--weights", enh_weights, "checkpoint file")->required();
  enh_cmd->add_option("--in", enh_in, "input image or directory")->required();
  enh_cmd->add_option("--out", enh_out, "output directory")->capture_default_str();
  enh_cmd->add_option("--resize", enh_resize, "resize inputs to SxS before the forward pass");

  // eval
  auto* eval_cmd = app.add_subcommand("eval", "compute PSNR/SSIM/UCIQE over a dataset split");
  std::string eval_weights, eval_data, eval_split = "test", eval_out = "eval_out";
  double eval_ratio = 0.8;
  std::uint64_t eval_seed = 1;
  int eval_size = 256;
  eval_cmd->add_option("--weights", eval_weights, "checkpoint file")->required();
  eval_cmd->add_option("--data", eval_data, "dataset root with input/ and gt/")->required();
  eval_cmd->add_option("--split", eval_split, "test or train")->capture_default_str();
  eval_cmd->add_option("--out", eval_out, "output directory")->capture_default_str();
  eval_cmd->add_option("--ratio", eval_ratio, "train fraction of the split")->capture_default_str();
  eval_cmd->add_option("--split-seed", eval_seed, "split seed")->capture_default_str();
  eval_cmd->add_option("--size", eval_size, "resize edge for evaluation")->capture_default_str();

  // bench
  auto* bench_cmd = app.add_subcommand("bench", "time repeated single-image forwards");
  std::string bench_weights, bench_shape = "256x256", bench_out = "bench_out";
  int bench_iters = 30, bench_warmup = 10;
  bench_cmd->add_option("--weights", bench_weights, "checkpoint file (default: fresh default-config net)");
  bench_cmd->add_option("--shape", bench_shape, "input shape HxW")->capture_default_str();
  bench_cmd->add_option("--iters", bench_iters, "timed iterations")->capture_default_str();
  bench_cmd->add_option("--warmup", bench_warmup, "untimed warmup iterations")->capture_default_str();
  bench_cmd->add_option("--out", bench_out, "output directory for the manifest")->capture_default_str();
  bench_cmd->add_option("--threads", threads, "worker threads for forward kernels")->capture_default_str();

  // inspect
  auto* ins_cmd = app.add_subcommand("inspect", "per-layer parameter/FLOPs table of a checkpoint");
  std::string ins_weights, ins_shape = "256x256";
  ins_cmd->add_option("--weights", ins_weights, "checkpoint file")->required();
  ins_cmd->add_option("--shape", ins_shape, "input shape HxW for the FLOPs walk")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\nrun with --help for usage\n";
    return 2;
  }

  runtime::set_thread_count(threads);
  try {
    if (*train_cmd)
      return cmd_train(train_data, train_config, train_out, train_seed, train_epochs, train_batch,
                       opt_seed->count() > 0, opt_epochs->count() > 0, opt_batch->count() > 0);
    if (*enh_cmd) return cmd_enhance(enh_weights, enh_in, enh_out, enh_resize);
    if (*eval_cmd) return cmd_eval(eval_weights, eval_data, eval_split, eval_out, eval_ratio, eval_seed, eval_size);
    if (*bench_cmd) return cmd_bench(bench_weights, bench_shape, bench_iters, bench_warmup, bench_out);
    if (*ins_cmd) return cmd_inspect(ins_weights, ins_shape);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}

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
#include <chrono>
#include <filesystem>
#include <string>
#include <vector>

#include "lu2net/dataset.hpp"
#include "lu2net/metrics.hpp"
#include "lu2net/network.hpp"

namespace lu2net::pipeline {

/// load -> (resize) -> normalize -> forward -> denormalize.
template <std::floating_point T>
Tensor4<T> enhance_image(const Network<T>& net, const Tensor4<T>& img01, int resize_to = 0) {
  Tensor4<T> x = img01;
  if (resize_to > 0) x = img::resize_bilinear(x, resize_to, resize_to);
  return img::denormalize(forward(net, img::normalize(x)));
}

struct EnhanceStats {
  std::size_t processed = 0;
  std::vector<std::pair<std::string, std::string>> failures;  // path, reason
  double mean_ms = 0;
  double p50_ms = 0;
  double p95_ms = 0;
};

/// Enhances files one by one in the given (sorted) order, preserving
/// filenames under out_dir. Per-file failures are recorded and skipped.
template <std::floating_point T>
EnhanceStats enhance_paths(const Network<T>& net, const std::vector<std::string>& inputs,
                           const std::string& out_dir, int resize_to = 0) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  EnhanceStats stats;
  std::vector<double> times;
  for (const auto& path : inputs) {
    try {
      auto img01 = img::load_image<T>(path);
      const auto t0 = std::chrono::steady_clock::now();
      auto out01 = enhance_image(net, img01, resize_to);
      const auto t1 = std::chrono::steady_clock::now();
      times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
      img::save_image(out01, (fs::path(out_dir) / fs::path(path).filename()).string());
      ++stats.processed;
    } catch (const Error& e) {
      stats.failures.emplace_back(path, e.what());
    }
  }
  if (!times.empty()) {
    double sum = 0;
    for (double t : times) sum += t;
    stats.mean_ms = sum / static_cast<double>(times.size());
    std::sort(times.begin(), times.end());
    stats.p50_ms = metrics::percentile_sorted(times, 0.50);
    stats.p95_ms = metrics::percentile_sorted(times, 0.95);
  }
  return stats;
}

/// Sorted image files directly inside a directory (the frame order of a
/// video shot as frames), or the single file itself.
inline std::vector<std::string> collect_inputs(const std::string& in_path) {
  namespace fs = std::filesystem;
  std::vector<std::string> files;
  if (fs::is_directory(in_path)) {
    for (const auto& e : fs::directory_iterator(in_path))
      if (e.is_regular_file() && data::is_image_file(e.path())) files.push_back(e.path().string());
    std::sort(files.begin(), files.end());
  } else if (fs::is_regular_file(in_path)) {
    files.push_back(in_path);
  } else {
    throw IoError(strcat_(in_path, ": no such file or directory"));
  }
  if (files.empty()) throw IoError(strcat_(in_path, ": no PNG/PPM images found"));
  return files;
}

/// Per-pair PSNR/SSIM of the enhanced output against ground truth plus the
/// no-reference UCIQE of the output.
template <std::floating_point T>
std::vector<metrics::MetricRecord> evaluate_pairs(const Network<T>& net, const data::PairedDataset& ds,
                                                  const std::vector<std::size_t>& members,
                                                  const metrics::SsimParams& ssim_params = {},
                                                  const metrics::UciqeParams& uciqe_params = {}) {
  std::vector<metrics::MetricRecord> records;
  records.reserve(members.size());
  for (std::size_t idx : members) {
    const auto pair = data::load_pair<T>(ds, idx);
    Tensor4<T> out01 = img::denormalize(forward(net, pair.input));
    Tensor4<T> gt01 = img::denormalize(pair.gt);
    metrics::MetricRecord rec;
    rec.id = ds.pairs[idx].name;
    rec.psnr = metrics::psnr(out01, gt01);
    rec.ssim = metrics::ssim_mean(out01, gt01, ssim_params);
    rec.uciqe = metrics::uciqe(out01, uciqe_params);
    records.push_back(std::move(rec));
  }
  return records;
}

struct BenchReport {
  int height = 0;
  int width = 0;
  int iterations = 0;
  int warmup = 0;
  int threads = 1;
  double mean_ms = 0;
  double p50_ms = 0;
  double p95_ms = 0;
  double fps = 0;
};

/// Times repeated single-image forwards at a fixed shape; warmup runs are
/// excluded from the statistics.
template <std::floating_point T>
BenchReport bench_forward(const Network<T>& net, int height, int width, int iterations, int warmup) {
  if (iterations < 1) throw ConfigError("bench: iterations must be >= 1");
  SplitMix64 rng(0xBEBCu);
  Tensor4<T> x(1, net.config.input_channels, height, width);
  fill_uniform(x, rng, -1.0, 1.0);
  for (int i = 0; i < warmup; ++i) (void)forward(net, x);
  std::vector<double> times;
  times.reserve(static_cast<std::size_t>(iterations));
  for (int i = 0; i < iterations; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    (void)forward(net, x);
    const auto t1 = std::chrono::steady_clock::now();
    times.push_back(std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  BenchReport rep;
  rep.height = height;
  rep.width = width;
  rep.iterations = iterations;
  rep.warmup = warmup;
  rep.threads = runtime::thread_count();
  double sum = 0;
  for (double t : times) sum += t;
  rep.mean_ms = sum / static_cast<double>(times.size());
  std::sort(times.begin(), times.end());
  rep.p50_ms = metrics::percentile_sorted(times, 0.50);
  rep.p95_ms = metrics::percentile_sorted(times, 0.95);
  rep.fps = rep.mean_ms > 0 ? 1000.0 / rep.mean_ms : 0;
  return rep;
}

}  // namespace lu2net::pipeline

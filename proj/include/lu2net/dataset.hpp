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
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "lu2net/image.hpp"

namespace lu2net::data {

/// One aligned (degraded, ground-truth) pair, matched by filename across
/// the input/ and gt/ subdirectories.
struct PairRecord {
  std::string name;
  std::string input_path;
  std::string gt_path;
};

/// Filenames present on one side only. The loader keeps going with the
/// matched pairs but never drops files silently.
struct MatchReport {
  std::vector<std::string> inputs_without_gt;
  std::vector<std::string> gts_without_input;

  bool clean() const { return inputs_without_gt.empty() && gts_without_input.empty(); }
};

struct PairedDataset {
  std::string root;
  int target_size = 256;
  std::vector<PairRecord> pairs;  // sorted by name
  MatchReport report;

  std::size_t size() const { return pairs.size(); }
};

inline bool is_image_file(const std::filesystem::path& p) {
  const auto ext = p.extension().string();
  return ext == ".png" || ext == ".ppm";
}

inline PairedDataset open_paired_dataset(const std::string& root, int target_size = 256) {
  namespace fs = std::filesystem;
  const fs::path in_dir = fs::path(root) / "input";
  const fs::path gt_dir = fs::path(root) / "gt";
  if (!fs::is_directory(in_dir) || !fs::is_directory(gt_dir))
    throw IoError(strcat_("dataset root ", root, " must contain input/ and gt/ subdirectories"));

  std::unordered_map<std::string, fs::path> gts;
  for (const auto& e : fs::directory_iterator(gt_dir))
    if (e.is_regular_file() && is_image_file(e.path())) gts.emplace(e.path().filename().string(), e.path());

  PairedDataset ds;
  ds.root = root;
  ds.target_size = target_size;
  std::vector<std::string> gt_matched;
  for (const auto& e : fs::directory_iterator(in_dir)) {
    if (!e.is_regular_file() || !is_image_file(e.path())) continue;
    const std::string name = e.path().filename().string();
    auto it = gts.find(name);
    if (it == gts.end()) {
      ds.report.inputs_without_gt.push_back(name);
      continue;
    }
    ds.pairs.push_back({name, e.path().string(), it->second.string()});
    gt_matched.push_back(name);
  }
  for (const auto& [name, path] : gts)
    if (std::find(gt_matched.begin(), gt_matched.end(), name) == gt_matched.end())
      ds.report.gts_without_input.push_back(name);

  std::sort(ds.pairs.begin(), ds.pairs.end(),
            [](const PairRecord& a, const PairRecord& b) { return a.name < b.name; });
  std::sort(ds.report.inputs_without_gt.begin(), ds.report.inputs_without_gt.end());
  std::sort(ds.report.gts_without_input.begin(), ds.report.gts_without_input.end());
  return ds;
}

// ---------------------------------------------------------------------------
// Deterministic split: pairs are ordered by a stable hash of filename mixed
// with the seed, then the first ceil(ratio * n) go to train.
// ---------------------------------------------------------------------------

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

inline Split split_names(const std::vector<std::string>& names, double ratio, std::uint64_t seed) {
  if (names.empty()) throw ConfigError("cannot split an empty dataset");
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError(strcat_("split ratio must be in (0,1), got ", ratio));
  struct Keyed {
    std::uint64_t key;
    std::size_t idx;
  };
  std::vector<Keyed> keyed(names.size());
  const std::uint64_t salt = SplitMix64(seed).next_u64();
  for (std::size_t i = 0; i < names.size(); ++i) keyed[i] = {fnv1a64(names[i]) ^ salt, i};
  std::sort(keyed.begin(), keyed.end(), [&names](const Keyed& a, const Keyed& b) {
    if (a.key != b.key) return a.key < b.key;
    return names[a.idx] < names[b.idx];
  });
  const std::size_t n_train =
      static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(names.size())));
  Split s;
  for (std::size_t i = 0; i < keyed.size(); ++i)
    (i < n_train ? s.train : s.test).push_back(keyed[i].idx);
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

inline Split split_dataset(const PairedDataset& ds, double ratio, std::uint64_t seed) {
  std::vector<std::string> names;
  names.reserve(ds.pairs.size());
  for (const auto& p : ds.pairs) names.push_back(p.name);
  return split_names(names, ratio, seed);
}

// ---------------------------------------------------------------------------
// Batching: a deterministic Fisher-Yates shuffle per epoch, chunked; the
// final short batch is emitted.
// ---------------------------------------------------------------------------

inline std::vector<std::vector<std::size_t>> make_batches(const std::vector<std::size_t>& members, int batch_size,
                                                          std::uint64_t epoch_seed) {
  if (batch_size < 1) throw ConfigError(strcat_("batch size must be >= 1, got ", batch_size));
  std::vector<std::size_t> order = members;
  SplitMix64 rng(epoch_seed);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.next_below(i)]);
  std::vector<std::vector<std::size_t>> batches;
  for (std::size_t at = 0; at < order.size(); at += static_cast<std::size_t>(batch_size)) {
    const std::size_t end = std::min(order.size(), at + static_cast<std::size_t>(batch_size));
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(at),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

// ---------------------------------------------------------------------------
// Pair loading: decode, resize to target, normalize to [-1,1].
// ---------------------------------------------------------------------------

template <std::floating_point T>
struct LoadedPair {
  Tensor4<T> input;  // 1 x 3 x S x S in [-1,1]
  Tensor4<T> gt;
};

template <std::floating_point T>
LoadedPair<T> load_pair(const PairedDataset& ds, std::size_t idx) {
  const PairRecord& rec = ds.pairs.at(idx);
  const int s = ds.target_size;
  LoadedPair<T> out;
  out.input = img::normalize(img::resize_bilinear(img::load_image<T>(rec.input_path), s, s));
  out.gt = img::normalize(img::resize_bilinear(img::load_image<T>(rec.gt_path), s, s));
  return out;
}

/// In-memory decoded-pair cache for small fixtures.
template <std::floating_point T>
class PairCache {
public:
  PairCache(const PairedDataset& ds, std::size_t max_pairs = 64) : ds_(ds), enabled_(ds.size() <= max_pairs) {}

  const LoadedPair<T>& get(std::size_t idx) {
    if (!enabled_) {
      scratch_ = load_pair<T>(ds_, idx);
      return scratch_;
    }
    auto it = cache_.find(idx);
    if (it == cache_.end()) it = cache_.emplace(idx, load_pair<T>(ds_, idx)).first;
    return it->second;
  }

private:
  const PairedDataset& ds_;
  bool enabled_;
  std::unordered_map<std::size_t, LoadedPair<T>> cache_;
  LoadedPair<T> scratch_;
};

/// Stacks pairs into batch tensors (N x 3 x S x S each, values in [-1,1]).
template <std::floating_point T>
std::pair<Tensor4<T>, Tensor4<T>> assemble_batch(PairCache<T>& cache, const std::vector<std::size_t>& members,
                                                 int target_size) {
  const int n = static_cast<int>(members.size());
  Tensor4<T> in(n, 3, target_size, target_size);
  Tensor4<T> gt(n, 3, target_size, target_size);
  const std::int64_t per = std::int64_t{3} * target_size * target_size;
  for (int i = 0; i < n; ++i) {
    const LoadedPair<T>& p = cache.get(members[static_cast<std::size_t>(i)]);
    if (p.input.size() != per || p.gt.size() != per)
      throw ShapeError(strcat_("pair tensors have unexpected size for target ", target_size));
    std::copy(p.input.data(), p.input.data() + per, in.data() + std::int64_t{i} * per);
    std::copy(p.gt.data(), p.gt.data() + per, gt.data() + std::int64_t{i} * per);
  }
  return {std::move(in), std::move(gt)};
}

}  // namespace lu2net::data

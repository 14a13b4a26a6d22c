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

#include <atomic>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace lu2net {

/// Base class for all library errors.
class Error : public std::runtime_error {
public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Tensor/operand dimensions do not fit together.
class ShapeError : public Error {
public:
  using Error::Error;
};

/// A configuration value is invalid (bad kernel size, bad ratio, ...).
class ConfigError : public Error {
public:
  using Error::Error;
};

/// File decoding/encoding failed or a file is malformed.
class IoError : public Error {
public:
  using Error::Error;
};

/// A numeric computation produced or encountered non-finite values.
class NumericError : public Error {
public:
  using Error::Error;
};

/// A named entity (tensor, gradient) was requested but is not present.
class LookupError : public Error {
public:
  using Error::Error;
};

/// Builds a message from stream-formattable pieces.
template <typename... Args>
std::string strcat_(Args&&... args) {
  std::ostringstream os;
  (os << ... << args);
  return os.str();
}

// ---------------------------------------------------------------------------
// Deterministic RNG.
//
// All randomness in the library (parameter init, dataset shuffles) goes
// through this generator so that a seed pins the exact byte stream on every
// platform. std::shuffle / std::uniform_real_distribution are
// implementation-defined and would break cross-toolchain determinism.
// ---------------------------------------------------------------------------

class SplitMix64 {
public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0,1) with 53 random mantissa bits.
  double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo,hi).
  double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

  /// Uniform integer in [0,n). n must be positive.
  std::uint64_t next_below(std::uint64_t n) {
    // Rejection sampling keeps the draw unbiased.
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v;
    do {
      v = next_u64();
    } while (v >= limit);
    return v % n;
  }

private:
  std::uint64_t state_;
};

inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
  SplitMix64 rng(a ^ (b + 0x9E3779B97F4A7C15ull + (a << 6) + (a >> 2)));
  return rng.next_u64();
}

/// FNV-1a 64-bit hash, used for stable filename-based dataset splits.
inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 14695981039346656037ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

// ---------------------------------------------------------------------------
// Intra-op parallelism.
//
// A process-global worker count, default 1. Work is split into disjoint
// contiguous ranges so results are bitwise identical for any thread count.
// ---------------------------------------------------------------------------

namespace runtime {

inline std::atomic<int>& thread_count_ref() {
  static std::atomic<int> n{1};
  return n;
}

inline int thread_count() { return thread_count_ref().load(std::memory_order_relaxed); }

inline void set_thread_count(int n) { thread_count_ref().store(n < 1 ? 1 : n, std::memory_order_relaxed); }

}  // namespace runtime

/// Runs fn(begin, end) over disjoint subranges of [0,n), possibly on
/// several threads. Each index is handled exactly once, so any writes to
/// per-index outputs are race-free and independent of the thread count.
template <typename Fn>
void parallel_for(std::int64_t n, Fn&& fn) {
  const int wanted = runtime::thread_count();
  if (n <= 0) return;
  if (wanted <= 1 || n == 1) {
    fn(std::int64_t{0}, n);
    return;
  }
  const int workers = static_cast<int>(std::min<std::int64_t>(wanted, n));
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers) - 1);
  const std::int64_t chunk = (n + workers - 1) / workers;
  for (int t = 1; t < workers; ++t) {
    const std::int64_t b = t * chunk;
    const std::int64_t e = std::min<std::int64_t>(n, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&fn, b, e] { fn(b, e); });
  }
  fn(std::int64_t{0}, std::min<std::int64_t>(chunk, n));
  for (auto& th : pool) th.join();
}

}  // namespace lu2net

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
#include <concepts>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "lu2net/common.hpp"

namespace lu2net {

/// N x C x H x W extents of a Tensor4.
struct Dims4 {
  int n = 0;
  int c = 0;
  int h = 0;
  int w = 0;

  friend bool operator==(const Dims4&, const Dims4&) = default;

  std::int64_t count() const {
    return std::int64_t{n} * c * h * w;
  }

  std::string str() const {
    return strcat_(n, "x", c, "x", h, "x", w);
  }
};

/// Dense 4-D array, row-major with W fastest. The single data carrier for
/// activations, weights and gradients. The scalar type selects the
/// precision: float for speed paths, double for gradient-check paths.
template <std::floating_point T>
class Tensor4 {
public:
  Tensor4() = default;

  Tensor4(int n, int c, int h, int w) : dims_{n, c, h, w} {
    if (n < 0 || c < 0 || h < 0 || w < 0)
      throw ShapeError(strcat_("tensor dims must be nonnegative, got ", dims_.str()));
    data_.assign(static_cast<std::size_t>(dims_.count()), T{0});
  }

  explicit Tensor4(const Dims4& d) : Tensor4(d.n, d.c, d.h, d.w) {}

  Tensor4(const Dims4& d, std::vector<T> data) : dims_(d), data_(std::move(data)) {
    if (static_cast<std::int64_t>(data_.size()) != dims_.count())
      throw ShapeError(strcat_("data length ", data_.size(), " does not match dims ", dims_.str()));
  }

  static Tensor4 full(const Dims4& d, T value) {
    Tensor4 t(d);
    for (auto& v : t.data_) v = value;
    return t;
  }

  const Dims4& dims() const { return dims_; }
  int n() const { return dims_.n; }
  int c() const { return dims_.c; }
  int h() const { return dims_.h; }
  int w() const { return dims_.w; }
  std::int64_t size() const { return static_cast<std::int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  std::int64_t index(int n, int c, int h, int w) const {
    return ((std::int64_t{n} * dims_.c + c) * dims_.h + h) * dims_.w + w;
  }

  T& at(int n, int c, int h, int w) { return data_[static_cast<std::size_t>(index(n, c, h, w))]; }
  T at(int n, int c, int h, int w) const { return data_[static_cast<std::size_t>(index(n, c, h, w))]; }

  /// Base pointer of one channel plane (H*W contiguous scalars).
  T* plane(int n, int c) { return data_.data() + index(n, c, 0, 0); }
  const T* plane(int n, int c) const { return data_.data() + index(n, c, 0, 0); }

  /// Base pointer of one row (W contiguous scalars).
  T* row(int n, int c, int h) { return data_.data() + index(n, c, h, 0); }
  const T* row(int n, int c, int h) const { return data_.data() + index(n, c, h, 0); }

  void fill(T value) {
    for (auto& v : data_) v = value;
  }

  bool all_finite() const {
    for (const T v : data_)
      if (!std::isfinite(v)) return false;
    return true;
  }

  template <std::floating_point U>
  Tensor4<U> cast() const {
    Tensor4<U> out(dims_);
    for (std::int64_t i = 0; i < size(); ++i) out.data()[i] = static_cast<U>(data_[static_cast<std::size_t>(i)]);
    return out;
  }

private:
  Dims4 dims_;
  std::vector<T> data_;
};

template <std::floating_point T>
bool bitwise_equal(const Tensor4<T>& a, const Tensor4<T>& b) {
  if (!(a.dims() == b.dims())) return false;
  if (a.size() == 0) return true;
  return std::memcmp(a.data(), b.data(), sizeof(T) * static_cast<std::size_t>(a.size())) == 0;
}

template <std::floating_point T>
T max_abs_diff(const Tensor4<T>& a, const Tensor4<T>& b) {
  if (!(a.dims() == b.dims()))
    throw ShapeError(strcat_("max_abs_diff on mismatched dims ", a.dims().str(), " vs ", b.dims().str()));
  T m = 0;
  for (std::int64_t i = 0; i < a.size(); ++i) {
    const T d = std::abs(a.data()[i] - b.data()[i]);
    if (d > m) m = d;
  }
  return m;
}

/// Fills with uniform values in [lo,hi) drawn from rng, in index order.
template <std::floating_point T>
void fill_uniform(Tensor4<T>& t, SplitMix64& rng, double lo, double hi) {
  for (std::int64_t i = 0; i < t.size(); ++i) t.data()[i] = static_cast<T>(rng.next_uniform(lo, hi));
}

}  // namespace lu2net

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

#include <zlib.h>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "lu2net/network.hpp"

namespace lu2net::ckpt {

// Checkpoint file layout (fixed little-endian):
//   magic "LU2N" | version u32 | tensor count u32 |
//   per tensor: name length u16, UTF-8 name, ndim u8, dims u32 x ndim,
//               raw 32-bit little-endian floats |
//   trailing CRC32 (zlib) over every preceding byte.

inline constexpr char kMagic[4] = {'L', 'U', '2', 'N'};
inline constexpr std::uint32_t kVersion = 1;

struct TensorEntry {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;

  std::uint64_t element_count() const {
    std::uint64_t n = 1;
    for (auto d : dims) n *= d;
    return n;
  }
};

namespace detail {

inline void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

inline void put_f32(std::vector<std::uint8_t>& out, float f) {
  std::uint32_t v;
  std::memcpy(&v, &f, 4);
  put_u32(out, v);
}

struct Reader {
  const std::vector<std::uint8_t>& bytes;
  std::size_t pos = 0;
  const std::string& path;

  void need(std::size_t n) const {
    if (pos + n > bytes.size()) throw IoError(strcat_(path, ": truncated checkpoint"));
  }
  std::uint16_t u16() {
    need(2);
    const std::uint16_t v = static_cast<std::uint16_t>(bytes[pos] | (bytes[pos + 1] << 8));
    pos += 2;
    return v;
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes[pos + static_cast<std::size_t>(i)]} << (8 * i);
    pos += 4;
    return v;
  }
  std::uint8_t u8() {
    need(1);
    return bytes[pos++];
  }
  float f32() {
    const std::uint32_t v = u32();
    float f;
    std::memcpy(&f, &v, 4);
    return f;
  }
};

}  // namespace detail

inline void write_checkpoint(const std::string& path, const std::vector<TensorEntry>& entries) {
  std::vector<std::uint8_t> out;
  out.insert(out.end(), kMagic, kMagic + 4);
  detail::put_u32(out, kVersion);
  detail::put_u32(out, static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    if (e.name.size() > 0xFFFF) throw ConfigError(strcat_("tensor name too long: ", e.name));
    if (e.element_count() != e.data.size())
      throw ShapeError(strcat_("tensor ", e.name, ": dims disagree with data length"));
    detail::put_u16(out, static_cast<std::uint16_t>(e.name.size()));
    out.insert(out.end(), e.name.begin(), e.name.end());
    out.push_back(static_cast<std::uint8_t>(e.dims.size()));
    for (auto d : e.dims) detail::put_u32(out, d);
    for (float f : e.data) detail::put_f32(out, f);
  }
  const std::uint32_t crc =
      static_cast<std::uint32_t>(::crc32(0L, out.data(), static_cast<::uInt>(out.size())));
  detail::put_u32(out, crc);

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError(strcat_("cannot open ", path, " for writing"));
  f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError(strcat_("short write to ", path));
}

inline std::vector<TensorEntry> read_checkpoint(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError(strcat_("cannot open ", path));
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());

  if (bytes.size() < 16) throw IoError(strcat_(path, ": truncated checkpoint"));
  if (std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw IoError(strcat_(path, ": bad magic, not a LU2N checkpoint"));
  {
    const std::size_t body = bytes.size() - 4;
    const std::uint32_t stored = static_cast<std::uint32_t>(bytes[body]) |
                                 (std::uint32_t{bytes[body + 1]} << 8) | (std::uint32_t{bytes[body + 2]} << 16) |
                                 (std::uint32_t{bytes[body + 3]} << 24);
    const std::uint32_t crc = static_cast<std::uint32_t>(::crc32(0L, bytes.data(), static_cast<::uInt>(body)));
    if (crc != stored) throw IoError(strcat_(path, ": checksum mismatch (corrupt or truncated)"));
  }

  detail::Reader r{bytes, 4, path};
  const std::uint32_t version = r.u32();
  if (version != kVersion) throw IoError(strcat_(path, ": unsupported checkpoint version ", version));
  const std::uint32_t count = r.u32();
  std::vector<TensorEntry> entries;
  entries.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    TensorEntry e;
    const std::uint16_t name_len = r.u16();
    r.need(name_len);
    e.name.assign(reinterpret_cast<const char*>(&bytes[r.pos]), name_len);
    r.pos += name_len;
    const std::uint8_t ndim = r.u8();
    for (int d = 0; d < ndim; ++d) e.dims.push_back(r.u32());
    const std::uint64_t n = e.element_count();
    e.data.resize(n);
    for (std::uint64_t j = 0; j < n; ++j) e.data[static_cast<std::size_t>(j)] = r.f32();
    entries.push_back(std::move(e));
  }
  if (r.pos != bytes.size() - 4) throw IoError(strcat_(path, ": trailing bytes after tensor records"));
  return entries;
}

// ---------------------------------------------------------------------------
// Network <-> checkpoint. The architecture configuration rides along as
// config.* meta tensors so a checkpoint alone reconstructs the network.
// ---------------------------------------------------------------------------

namespace detail {

inline TensorEntry scalar_entry(const std::string& name, float v) {
  return {name, {1}, {v}};
}

template <std::floating_point T>
TensorEntry tensor_entry(const std::string& name, const Tensor4<T>& t) {
  TensorEntry e;
  e.name = name;
  const Dims4& d = t.dims();
  e.dims = {static_cast<std::uint32_t>(d.n), static_cast<std::uint32_t>(d.c), static_cast<std::uint32_t>(d.h),
            static_cast<std::uint32_t>(d.w)};
  e.data.resize(static_cast<std::size_t>(t.size()));
  for (std::int64_t i = 0; i < t.size(); ++i) e.data[static_cast<std::size_t>(i)] = static_cast<float>(t.data()[i]);
  return e;
}

}  // namespace detail

template <std::floating_point T>
std::vector<TensorEntry> network_entries(const Network<T>& net) {
  std::vector<TensorEntry> entries;
  const NetworkConfig& cfg = net.config;
  TensorEntry widths;
  widths.name = "config.stage_widths";
  widths.dims = {static_cast<std::uint32_t>(cfg.stage_widths.size())};
  for (int w : cfg.stage_widths) widths.data.push_back(static_cast<float>(w));
  entries.push_back(std::move(widths));
  entries.push_back(detail::scalar_entry("config.axial_k", static_cast<float>(cfg.axial_k)));
  entries.push_back(detail::scalar_entry("config.ca_reduction", static_cast<float>(cfg.ca_reduction)));
  entries.push_back(detail::scalar_entry("config.activation", static_cast<float>(static_cast<int>(cfg.activation))));
  entries.push_back(
      detail::scalar_entry("config.output_activation", static_cast<float>(static_cast<int>(cfg.output_activation))));
  entries.push_back(detail::scalar_entry("config.input_channels", static_cast<float>(cfg.input_channels)));
  entries.push_back(detail::scalar_entry("config.output_channels", static_cast<float>(cfg.output_channels)));
  visit_params(net, [&entries](const std::string& name, const Tensor4<T>& t) {
    entries.push_back(detail::tensor_entry(name, t));
  });
  return entries;
}

template <std::floating_point T>
void save_network(const Network<T>& net, const std::string& path) {
  write_checkpoint(path, network_entries(net));
}

inline const TensorEntry* find_entry(const std::vector<TensorEntry>& entries, const std::string& name) {
  for (const auto& e : entries)
    if (e.name == name) return &e;
  return nullptr;
}

inline float scalar_of(const std::vector<TensorEntry>& entries, const std::string& name, const std::string& path) {
  const TensorEntry* e = find_entry(entries, name);
  if (!e || e->data.size() != 1) throw IoError(strcat_(path, ": missing scalar tensor '", name, "'"));
  return e->data[0];
}

inline NetworkConfig config_from_entries(const std::vector<TensorEntry>& entries, const std::string& path) {
  NetworkConfig cfg;
  const TensorEntry* widths = find_entry(entries, "config.stage_widths");
  if (!widths || widths->data.empty()) throw IoError(strcat_(path, ": missing tensor 'config.stage_widths'"));
  cfg.stage_widths.clear();
  for (float f : widths->data) cfg.stage_widths.push_back(static_cast<int>(f));
  cfg.axial_k = static_cast<int>(scalar_of(entries, "config.axial_k", path));
  cfg.ca_reduction = static_cast<int>(scalar_of(entries, "config.ca_reduction", path));
  cfg.activation = static_cast<ActivationKind>(static_cast<int>(scalar_of(entries, "config.activation", path)));
  cfg.output_activation =
      static_cast<ActivationKind>(static_cast<int>(scalar_of(entries, "config.output_activation", path)));
  cfg.input_channels = static_cast<int>(scalar_of(entries, "config.input_channels", path));
  cfg.output_channels = static_cast<int>(scalar_of(entries, "config.output_channels", path));
  cfg.validate();
  return cfg;
}

/// Fills an allocated network from entries; unknown extra entries are
/// ignored (training checkpoints carry optimizer state alongside).
template <std::floating_point T>
void fill_network(Network<T>& net, const std::vector<TensorEntry>& entries, const std::string& path) {
  visit_params(net, [&entries, &path](const std::string& name, Tensor4<T>& t) {
    const TensorEntry* e = find_entry(entries, name);
    if (!e) throw IoError(strcat_(path, ": missing tensor '", name, "'"));
    const Dims4& d = t.dims();
    const std::vector<std::uint32_t> want = {static_cast<std::uint32_t>(d.n), static_cast<std::uint32_t>(d.c),
                                             static_cast<std::uint32_t>(d.h), static_cast<std::uint32_t>(d.w)};
    if (e->dims != want)
      throw IoError(strcat_(path, ": tensor '", name, "' has shape ", e->dims.size(), "-d/", e->element_count(),
                            " elements, expected ", d.str()));
    for (std::int64_t i = 0; i < t.size(); ++i) t.data()[i] = static_cast<T>(e->data[static_cast<std::size_t>(i)]);
  });
}

/// Loads a network using the configuration embedded in the file.
template <std::floating_point T>
Network<T> load_network(const std::string& path) {
  const auto entries = read_checkpoint(path);
  Network<T> net = make_network<T>(config_from_entries(entries, path));
  fill_network(net, entries, path);
  return net;
}

/// Loads a network and checks the file against an expected configuration.
template <std::floating_point T>
Network<T> load_network(const std::string& path, const NetworkConfig& expected) {
  const auto entries = read_checkpoint(path);
  const NetworkConfig stored = config_from_entries(entries, path);
  if (stored.stage_widths != expected.stage_widths || stored.axial_k != expected.axial_k ||
      stored.ca_reduction != expected.ca_reduction || stored.input_channels != expected.input_channels ||
      stored.output_channels != expected.output_channels)
    throw IoError(strcat_(path, ": checkpoint architecture does not match the requested configuration"));
  Network<T> net = make_network<T>(expected);
  fill_network(net, entries, path);
  return net;
}

}  // namespace lu2net::ckpt

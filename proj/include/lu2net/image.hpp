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
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "lu2net/ops.hpp"

namespace lu2net::img {

/// Interleaved 8-bit RGB pixels.
struct ImageU8 {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> rgb;  // 3 bytes per pixel, row-major
};

namespace detail {

inline std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError(strcat_("cannot open ", path));
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return bytes;
}

inline void write_file(const std::string& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError(strcat_("cannot open ", path, " for writing"));
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError(strcat_("short write to ", path));
}

inline std::uint32_t be32(const std::uint8_t* p) {
  return (std::uint32_t{p[0]} << 24) | (std::uint32_t{p[1]} << 16) | (std::uint32_t{p[2]} << 8) | p[3];
}

inline void push_be32(std::vector<std::uint8_t>& v, std::uint32_t x) {
  v.push_back(static_cast<std::uint8_t>(x >> 24));
  v.push_back(static_cast<std::uint8_t>(x >> 16));
  v.push_back(static_cast<std::uint8_t>(x >> 8));
  v.push_back(static_cast<std::uint8_t>(x));
}

inline int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a), pb = std::abs(p - b), pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

}  // namespace detail

inline constexpr std::uint8_t kPngSignature[8] = {137, 80, 78, 71, 13, 10, 26, 10};

inline bool looks_like_png(const std::vector<std::uint8_t>& bytes) {
  return bytes.size() >= 8 && std::memcmp(bytes.data(), kPngSignature, 8) == 0;
}

/// Minimal PNG reader: 8-bit RGB (color type 2) or RGBA (6, alpha dropped),
/// no interlace. Chunk CRCs are verified.
inline ImageU8 png_decode(const std::vector<std::uint8_t>& bytes, const std::string& path) {
  using namespace detail;
  if (!looks_like_png(bytes)) throw IoError(strcat_(path, ": not a PNG file"));
  std::size_t pos = 8;
  bool saw_ihdr = false, saw_iend = false;
  std::uint32_t width = 0, height = 0;
  int channels = 0;
  std::vector<std::uint8_t> idat;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t len = be32(&bytes[pos]);
    if (pos + 12 + len > bytes.size()) throw IoError(strcat_(path, ": truncated PNG chunk"));
    const char* type = reinterpret_cast<const char*>(&bytes[pos + 4]);
    const std::uint8_t* data = &bytes[pos + 8];
    const std::uint32_t stored_crc = be32(&bytes[pos + 8 + len]);
    const std::uint32_t crc =
        static_cast<std::uint32_t>(::crc32(::crc32(0L, &bytes[pos + 4], 4), data, len));
    if (crc != stored_crc) throw IoError(strcat_(path, ": PNG chunk CRC mismatch"));
    const std::string t(type, 4);
    if (t == "IHDR") {
      if (len != 13) throw IoError(strcat_(path, ": bad IHDR length"));
      width = be32(data);
      height = be32(data + 4);
      const int depth = data[8], color = data[9], comp = data[10], filt = data[11], inter = data[12];
      if (depth != 8) throw IoError(strcat_(path, ": unsupported PNG bit depth ", depth, " (only 8)"));
      if (color != 2 && color != 6)
        throw IoError(strcat_(path, ": unsupported PNG color type ", color, " (only RGB/RGBA)"));
      if (comp != 0 || filt != 0) throw IoError(strcat_(path, ": unsupported PNG compression/filter method"));
      if (inter != 0) throw IoError(strcat_(path, ": interlaced PNG is not supported"));
      channels = color == 2 ? 3 : 4;
      saw_ihdr = true;
    } else if (t == "IDAT") {
      idat.insert(idat.end(), data, data + len);
    } else if (t == "IEND") {
      saw_iend = true;
      break;
    }
    pos += 12 + len;
  }
  if (!saw_ihdr || !saw_iend || width == 0 || height == 0)
    throw IoError(strcat_(path, ": truncated or malformed PNG"));

  const std::size_t stride = std::size_t{width} * static_cast<std::size_t>(channels);
  std::vector<std::uint8_t> raw(std::size_t{height} * (stride + 1));
  {
    ::uLongf out_len = static_cast<::uLongf>(raw.size());
    const int rc = ::uncompress(raw.data(), &out_len, idat.data(), static_cast<::uLong>(idat.size()));
    if (rc != Z_OK || out_len != raw.size()) throw IoError(strcat_(path, ": PNG pixel data is corrupt"));
  }

  ImageU8 out;
  out.width = static_cast<int>(width);
  out.height = static_cast<int>(height);
  out.rgb.resize(std::size_t{width} * height * 3);
  std::vector<std::uint8_t> prev(stride, 0), cur(stride, 0);
  const int bpp = channels;
  for (std::uint32_t y = 0; y < height; ++y) {
    const std::uint8_t* line = &raw[std::size_t{y} * (stride + 1)];
    const int filter = line[0];
    const std::uint8_t* src = line + 1;
    for (std::size_t i = 0; i < stride; ++i) {
      const int left = i >= static_cast<std::size_t>(bpp) ? cur[i - static_cast<std::size_t>(bpp)] : 0;
      const int up = prev[i];
      const int ul = i >= static_cast<std::size_t>(bpp) ? prev[i - static_cast<std::size_t>(bpp)] : 0;
      int v = src[i];
      switch (filter) {
        case 0: break;
        case 1: v += left; break;
        case 2: v += up; break;
        case 3: v += (left + up) / 2; break;
        case 4: v += detail::paeth(left, up, ul); break;
        default: throw IoError(strcat_(path, ": unknown PNG filter ", filter));
      }
      cur[i] = static_cast<std::uint8_t>(v & 0xFF);
    }
    for (std::uint32_t x = 0; x < width; ++x)
      for (int c = 0; c < 3; ++c)
        out.rgb[(std::size_t{y} * width + x) * 3 + static_cast<std::size_t>(c)] =
            cur[std::size_t{x} * static_cast<std::size_t>(bpp) + static_cast<std::size_t>(c)];
    std::swap(prev, cur);
  }
  return out;
}

/// Minimal PNG writer: 8-bit RGB, filter 0 scanlines.
inline std::vector<std::uint8_t> png_encode(const ImageU8& im) {
  using namespace detail;
  const std::size_t stride = std::size_t{static_cast<std::size_t>(im.width)} * 3;
  std::vector<std::uint8_t> raw(std::size_t{static_cast<std::size_t>(im.height)} * (stride + 1));
  for (int y = 0; y < im.height; ++y) {
    std::uint8_t* line = &raw[static_cast<std::size_t>(y) * (stride + 1)];
    line[0] = 0;
    std::memcpy(line + 1, &im.rgb[static_cast<std::size_t>(y) * stride], stride);
  }
  ::uLongf bound = ::compressBound(static_cast<::uLong>(raw.size()));
  std::vector<std::uint8_t> compressed(bound);
  if (::compress2(compressed.data(), &bound, raw.data(), static_cast<::uLong>(raw.size()), 6) != Z_OK)
    throw IoError("PNG deflate failed");
  compressed.resize(bound);

  std::vector<std::uint8_t> out(kPngSignature, kPngSignature + 8);
  auto chunk = [&out](const char type[5], const std::vector<std::uint8_t>& data) {
    push_be32(out, static_cast<std::uint32_t>(data.size()));
    const std::size_t type_at = out.size();
    out.insert(out.end(), type, type + 4);
    out.insert(out.end(), data.begin(), data.end());
    const std::uint32_t crc = static_cast<std::uint32_t>(
        ::crc32(0L, &out[type_at], static_cast<::uInt>(4 + data.size())));
    push_be32(out, crc);
  };
  std::vector<std::uint8_t> ihdr;
  push_be32(ihdr, static_cast<std::uint32_t>(im.width));
  push_be32(ihdr, static_cast<std::uint32_t>(im.height));
  ihdr.push_back(8);   // bit depth
  ihdr.push_back(2);   // color type: RGB
  ihdr.push_back(0);   // compression
  ihdr.push_back(0);   // filter
  ihdr.push_back(0);   // no interlace
  chunk("IHDR", ihdr);
  chunk("IDAT", compressed);
  chunk("IEND", {});
  return out;
}

inline bool looks_like_ppm(const std::vector<std::uint8_t>& bytes) {
  return bytes.size() >= 2 && bytes[0] == 'P' && bytes[1] == '6';
}

/// Binary PPM (P6, maxval 255) reader. Comments after tokens are honored.
inline ImageU8 ppm_decode(const std::vector<std::uint8_t>& bytes, const std::string& path) {
  if (!looks_like_ppm(bytes)) throw IoError(strcat_(path, ": not a binary PPM (P6) file"));
  std::size_t pos = 2;
  auto next_int = [&]() -> int {
    // skip whitespace and '#' comments
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(bytes[pos])) {
        ++pos;
      } else {
        break;
      }
    }
    if (pos >= bytes.size() || !std::isdigit(bytes[pos])) throw IoError(strcat_(path, ": malformed PPM header"));
    int v = 0;
    while (pos < bytes.size() && std::isdigit(bytes[pos])) v = v * 10 + (bytes[pos++] - '0');
    return v;
  };
  const int w = next_int();
  const int h = next_int();
  const int maxval = next_int();
  if (maxval != 255) throw IoError(strcat_(path, ": PPM maxval must be 255, got ", maxval));
  if (pos >= bytes.size() || !std::isspace(bytes[pos])) throw IoError(strcat_(path, ": malformed PPM header"));
  ++pos;  // single whitespace before binary data
  const std::size_t need = std::size_t(w) * static_cast<std::size_t>(h) * 3;
  if (bytes.size() - pos < need) throw IoError(strcat_(path, ": truncated PPM pixel data"));
  ImageU8 out;
  out.width = w;
  out.height = h;
  out.rgb.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                 bytes.begin() + static_cast<std::ptrdiff_t>(pos + need));
  return out;
}

inline std::vector<std::uint8_t> ppm_encode(const ImageU8& im) {
  const std::string header = strcat_("P6\n", im.width, " ", im.height, "\n255\n");
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), im.rgb.begin(), im.rgb.end());
  return out;
}

// ---------------------------------------------------------------------------
// [0,1] tensor images (1 x 3 x H x W).
// ---------------------------------------------------------------------------

template <std::floating_point T>
Tensor4<T> to_tensor01(const ImageU8& im) {
  Tensor4<T> t(1, 3, im.height, im.width);
  const std::int64_t P = std::int64_t{im.height} * im.width;
  for (int c = 0; c < 3; ++c) {
    T* plane = t.plane(0, c);
    for (std::int64_t i = 0; i < P; ++i)
      plane[i] = static_cast<T>(im.rgb[static_cast<std::size_t>(i) * 3 + static_cast<std::size_t>(c)]) / T{255};
  }
  return t;
}

/// Round half up to 8 bits, clamped.
template <std::floating_point T>
ImageU8 from_tensor01(const Tensor4<T>& t) {
  if (t.n() != 1 || t.c() != 3) throw ShapeError(strcat_("image tensors must be 1x3xHxW, got ", t.dims().str()));
  ImageU8 im;
  im.width = t.w();
  im.height = t.h();
  im.rgb.resize(std::size_t(t.h()) * static_cast<std::size_t>(t.w()) * 3);
  const std::int64_t P = std::int64_t{t.h()} * t.w();
  for (int c = 0; c < 3; ++c) {
    const T* plane = t.plane(0, c);
    for (std::int64_t i = 0; i < P; ++i) {
      const double v = std::floor(static_cast<double>(plane[i]) * 255.0 + 0.5);
      im.rgb[static_cast<std::size_t>(i) * 3 + static_cast<std::size_t>(c)] =
          static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
    }
  }
  return im;
}

/// Decodes a PNG or binary PPM into a [0,1] image tensor.
template <std::floating_point T>
Tensor4<T> load_image(const std::string& path) {
  const auto bytes = detail::read_file(path);
  if (looks_like_png(bytes)) return to_tensor01<T>(png_decode(bytes, path));
  if (looks_like_ppm(bytes)) return to_tensor01<T>(ppm_decode(bytes, path));
  throw IoError(strcat_(path, ": unsupported image format (PNG or binary PPM expected)"));
}

/// Encodes by extension: .png or .ppm.
template <std::floating_point T>
void save_image(const Tensor4<T>& img01, const std::string& path) {
  const ImageU8 im = from_tensor01(img01);
  const auto ext = std::filesystem::path(path).extension().string();
  if (ext == ".png")
    detail::write_file(path, png_encode(im));
  else if (ext == ".ppm")
    detail::write_file(path, ppm_encode(im));
  else
    throw IoError(strcat_(path, ": unsupported output extension '", ext, "' (use .png or .ppm)"));
}

/// Corner-aligned bilinear resize. Equal input/output dims copy bitwise.
template <std::floating_point T>
Tensor4<T> resize_bilinear(const Tensor4<T>& img, int out_h, int out_w) {
  if (img.h() < 1 || img.w() < 1) throw ShapeError(strcat_("resize: empty source ", img.dims().str()));
  if (out_h < 1 || out_w < 1) throw ConfigError(strcat_("resize: bad target ", out_h, "x", out_w));
  if (img.h() == out_h && img.w() == out_w) return img;
  const auto ys = ops::corner_aligned_axis(img.h(), out_h);
  const auto xs = ops::corner_aligned_axis(img.w(), out_w);
  Tensor4<T> out(Dims4{img.n(), img.c(), out_h, out_w});
  for (int n = 0; n < img.n(); ++n)
    for (int c = 0; c < img.c(); ++c)
      for (int oy = 0; oy < out_h; ++oy) {
        const auto& Y = ys[static_cast<std::size_t>(oy)];
        const T ty = static_cast<T>(Y.t);
        const T* r0 = img.row(n, c, Y.i0);
        const T* r1 = img.row(n, c, Y.i1);
        T* orow = out.row(n, c, oy);
        for (int ox = 0; ox < out_w; ++ox) {
          const auto& X = xs[static_cast<std::size_t>(ox)];
          const T tx = static_cast<T>(X.t);
          const T top = r0[X.i0] + tx * (r0[X.i1] - r0[X.i0]);
          const T bot = r1[X.i0] + tx * (r1[X.i1] - r1[X.i0]);
          orow[ox] = top + ty * (bot - top);
        }
      }
  return out;
}

/// [0,1] -> [-1,1]: x -> 2x - 1.
template <std::floating_point T>
Tensor4<T> normalize(const Tensor4<T>& img01) {
  return ops::scalar_affine_fwd(img01, T{2}, T{-1});
}

/// [-1,1] -> [0,1]: (y+1)/2, then clamp.
template <std::floating_point T>
Tensor4<T> denormalize(const Tensor4<T>& pm1) {
  Tensor4<T> out(pm1.dims());
  for (std::int64_t i = 0; i < pm1.size(); ++i)
    out.data()[i] = std::clamp((pm1.data()[i] + T{1}) / T{2}, T{0}, T{1});
  return out;
}

}  // namespace lu2net::img

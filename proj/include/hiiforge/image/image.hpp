// Copyright 2026 The hiiforge Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hiiforge/core/error.hpp"
#include "hiiforge/core/records.hpp"

namespace hiiforge {

struct Rgb {
  std::uint8_t r = 0;
  std::uint8_t g = 0;
  std::uint8_t b = 0;

  friend bool operator==(const Rgb&, const Rgb&) = default;
};

// 8-bit RGB raster, row-major, interleaved.
class Image {
 public:
  Image() = default;
  Image(int width, int height, Rgb fill = {})
      : width_(width), height_(height),
        pixels_(static_cast<std::size_t>(checked_area(width, height)) * 3) {
    for (std::size_t i = 0; i < pixels_.size(); i += 3) {
      pixels_[i] = fill.r;
      pixels_[i + 1] = fill.g;
      pixels_[i + 2] = fill.b;
    }
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  bool empty() const noexcept { return pixels_.empty(); }

  Rgb at(int x, int y) const {
    const auto i = offset(x, y);
    return Rgb{pixels_[i], pixels_[i + 1], pixels_[i + 2]};
  }

  void set(int x, int y, Rgb c) {
    const auto i = offset(x, y);
    pixels_[i] = c.r;
    pixels_[i + 1] = c.g;
    pixels_[i + 2] = c.b;
  }

  std::span<const std::uint8_t> bytes() const noexcept { return pixels_; }
  std::span<std::uint8_t> bytes() noexcept { return pixels_; }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  static std::int64_t checked_area(int w, int h) {
    if (w <= 0 || h <= 0) throw ImageIoError("image dimensions must be positive");
    return static_cast<std::int64_t>(w) * h;
  }

  std::size_t offset(int x, int y) const {
    return (static_cast<std::size_t>(y) * static_cast<std::size_t>(width_) +
            static_cast<std::size_t>(x)) * 3;
  }

  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

namespace png_detail {

struct ImageGuard {
  png_image img{};
  ImageGuard() {
    std::memset(&img, 0, sizeof(img));
    img.version = PNG_IMAGE_VERSION;
  }
  ~ImageGuard() { png_image_free(&img); }
  ImageGuard(const ImageGuard&) = delete;
  ImageGuard& operator=(const ImageGuard&) = delete;
};

inline Image finish_read(ImageGuard& g, const std::string& what) {
  g.img.format = PNG_FORMAT_RGB;
  Image out(static_cast<int>(g.img.width), static_cast<int>(g.img.height));
  if (!png_image_finish_read(&g.img, nullptr, out.bytes().data(), 0, nullptr)) {
    throw ImageIoError("cannot decode " + what + ": " + g.img.message);
  }
  return out;
}

}  // namespace png_detail

inline Image load_png(const std::filesystem::path& path) {
  png_detail::ImageGuard g;
  if (!png_image_begin_read_from_file(&g.img, path.c_str())) {
    throw ImageIoError("cannot read " + path.string() + ": " + g.img.message);
  }
  return png_detail::finish_read(g, path.string());
}

inline Image decode_png(std::span<const std::uint8_t> data) {
  png_detail::ImageGuard g;
  if (!png_image_begin_read_from_memory(&g.img, data.data(), data.size())) {
    throw ImageIoError(std::string("cannot read PNG payload: ") + g.img.message);
  }
  return png_detail::finish_read(g, "PNG payload");
}

inline std::vector<std::uint8_t> encode_png(const Image& image) {
  png_detail::ImageGuard g;
  g.img.width = static_cast<png_uint_32>(image.width());
  g.img.height = static_cast<png_uint_32>(image.height());
  g.img.format = PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&g.img, nullptr, &size, 0, image.bytes().data(), 0, nullptr)) {
    throw ImageIoError(std::string("cannot encode PNG: ") + g.img.message);
  }
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&g.img, out.data(), &size, 0, image.bytes().data(), 0,
                                 nullptr)) {
    throw ImageIoError(std::string("cannot encode PNG: ") + g.img.message);
  }
  out.resize(size);
  return out;
}

inline void save_png(const Image& image, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  const auto data = encode_png(image);
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw ImageIoError("cannot write " + path.string());
  const auto written = std::fwrite(data.data(), 1, data.size(), f);
  const bool ok = std::fclose(f) == 0 && written == data.size();
  if (!ok) throw ImageIoError("short write to " + path.string());
}

// Pads each edge by ceil(fraction * max(width, height)) pixels and clamps to
// the image.
inline BoundingBox dilate(const BoundingBox& box, double fraction, int width, int height) {
  const double raw = fraction * static_cast<double>(std::max(width, height));
  const int pad = static_cast<int>(std::ceil(raw - 1e-9));
  return BoundingBox{std::max(0, box.x_min - pad), std::max(0, box.y_min - pad),
                     std::min(width, box.x_max + pad), std::min(height, box.y_max + pad)};
}

// Clamps a box to the image; returns false if nothing remains.
inline bool clamp_box(BoundingBox& box, int width, int height) {
  box.x_min = std::clamp(box.x_min, 0, width);
  box.x_max = std::clamp(box.x_max, 0, width);
  box.y_min = std::clamp(box.y_min, 0, height);
  box.y_max = std::clamp(box.y_max, 0, height);
  return box.x_min < box.x_max && box.y_min < box.y_max;
}

// Paints every pixel inside any region with `fill`. Regions must already lie
// within the image.
inline void fill_regions(Image& image, std::span<const BoundingBox> regions, Rgb fill) {
  for (const auto& r : regions) {
    validate(r, image.width(), image.height(), "region");
    for (int y = r.y_min; y < r.y_max; ++y) {
      for (int x = r.x_min; x < r.x_max; ++x) image.set(x, y, fill);
    }
  }
}

// Fraction of the box's pixels equal to `fill`.
inline double fill_fraction(const Image& image, const BoundingBox& box, Rgb fill) {
  BoundingBox b = box;
  if (!clamp_box(b, image.width(), image.height())) return 0.0;
  std::int64_t hits = 0;
  for (int y = b.y_min; y < b.y_max; ++y) {
    for (int x = b.x_min; x < b.x_max; ++x) hits += image.at(x, y) == fill ? 1 : 0;
  }
  return static_cast<double>(hits) / static_cast<double>(b.area());
}

}  // namespace hiiforge

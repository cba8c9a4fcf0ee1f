#pragma once

// Core raster types. Everything is row-major with a top-left origin;
// pixel (x, y) lives at index y * width + x.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "shadex/error.hpp"

namespace shadex {

using Rgb = std::array<double, 3>;

/// Single-channel raster of arbitrary element type.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height) {
    if (width < 0 || height < 0) fail_usage("negative raster size");
    data_.assign(static_cast<std::size_t>(width) * height, fill);
  }
  Grid(int width, int height, std::vector<T> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (width < 0 || height < 0 ||
        data_.size() != static_cast<std::size_t>(width) * height)
      fail_usage("raster data length does not match its shape");
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::size_t index(int x, int y) const noexcept {
    return static_cast<std::size_t>(y) * width_ + x;
  }
  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  T& operator()(int x, int y) { return data_[index(x, y)]; }
  const T& operator()(int x, int y) const { return data_[index(x, y)]; }
  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  std::span<T> data() noexcept { return data_; }
  std::span<const T> data() const noexcept { return data_; }
  const std::vector<T>& values() const noexcept { return data_; }

  template <typename U>
  bool same_shape(const Grid<U>& other) const noexcept {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

/// Boolean raster; uint8_t storage avoids the vector<bool> proxy.
using Mask = Grid<std::uint8_t>;

inline std::size_t count_true(const Mask& m) {
  return static_cast<std::size_t>(
      std::count_if(m.data().begin(), m.data().end(),
                    [](std::uint8_t v) { return v != 0; }));
}

/// Linear-light three-channel image, interleaved R,G,B.
class RgbImage {
 public:
  RgbImage() = default;
  RgbImage(int width, int height, Rgb fill = {0.0, 0.0, 0.0})
      : width_(width), height_(height) {
    if (width < 0 || height < 0) fail_usage("negative image size");
    data_.resize(static_cast<std::size_t>(width) * height * 3);
    for (std::size_t i = 0; i < pixel_count(); ++i)
      for (int c = 0; c < 3; ++c) data_[3 * i + c] = fill[c];
  }
  RgbImage(int width, int height, std::vector<double> data)
      : width_(width), height_(height), data_(std::move(data)) {
    if (width < 0 || height < 0 ||
        data_.size() != static_cast<std::size_t>(width) * height * 3)
      fail_usage("image data length does not match width*height*3");
    for (double v : data_)
      if (!std::isfinite(v) || v < 0.0)
        fail_data("image values must be finite and non-negative");
  }

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::size_t pixel_count() const noexcept {
    return static_cast<std::size_t>(width_) * height_;
  }
  bool empty() const noexcept { return data_.empty(); }

  double& at(int x, int y, int c) {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c];
  }
  double at(int x, int y, int c) const {
    return data_[(static_cast<std::size_t>(y) * width_ + x) * 3 + c];
  }
  Rgb pixel(int x, int y) const {
    const std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 3;
    return {data_[i], data_[i + 1], data_[i + 2]};
  }
  void set_pixel(int x, int y, const Rgb& v) {
    const std::size_t i = (static_cast<std::size_t>(y) * width_ + x) * 3;
    data_[i] = v[0];
    data_[i + 1] = v[1];
    data_[i + 2] = v[2];
  }

  Grid<double> channel(int c) const {
    Grid<double> out(width_, height_);
    for (std::size_t i = 0; i < pixel_count(); ++i) out[i] = data_[3 * i + c];
    return out;
  }

  std::span<const double> data() const noexcept { return data_; }
  std::span<double> data() noexcept { return data_; }

  friend bool operator==(const RgbImage&, const RgbImage&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<double> data_;
};

inline RgbImage from_channels(const Grid<double>& r, const Grid<double>& g,
                              const Grid<double>& b) {
  if (!r.same_shape(g) || !r.same_shape(b))
    fail_usage("channel shapes differ");
  RgbImage out(r.width(), r.height());
  auto d = out.data();
  for (std::size_t i = 0; i < r.size(); ++i) {
    d[3 * i] = r[i];
    d[3 * i + 1] = g[i];
    d[3 * i + 2] = b[i];
  }
  return out;
}

/// Scalar raster with an optional validity mask; an absent mask means
/// every pixel is valid.
struct ScalarField {
  Grid<double> values;
  std::optional<Mask> valid;

  ScalarField() = default;
  explicit ScalarField(Grid<double> v, std::optional<Mask> m = std::nullopt)
      : values(std::move(v)), valid(std::move(m)) {
    if (valid && !valid->same_shape(values))
      fail_usage("validity mask shape differs from field");
  }
  ScalarField(int width, int height, double fill = 0.0)
      : values(width, height, fill) {}

  int width() const noexcept { return values.width(); }
  int height() const noexcept { return values.height(); }
  std::size_t size() const noexcept { return values.size(); }

  bool is_valid(std::size_t i) const noexcept {
    return !valid || (*valid)[i] != 0;
  }
  bool is_valid(int x, int y) const noexcept {
    return is_valid(values.index(x, y));
  }
  double operator()(int x, int y) const { return values(x, y); }
  double& operator()(int x, int y) { return values(x, y); }

  /// Values with invalid pixels replaced by `fill`.
  Grid<double> filled(double fill) const {
    Grid<double> out = values;
    if (valid)
      for (std::size_t i = 0; i < out.size(); ++i)
        if (!(*valid)[i]) out[i] = fill;
    return out;
  }
};

/// Per-channel natural log of a clamped image. The clamp floor is kept
/// with the data so downstream code can tell clamped pixels apart.
struct LogImage {
  std::array<Grid<double>, 3> channels;
  double epsilon = 0.0;

  int width() const noexcept { return channels[0].width(); }
  int height() const noexcept { return channels[0].height(); }
};

inline constexpr double kDefaultEpsilon = 1e-4;

inline LogImage to_log(const RgbImage& img, double epsilon = kDefaultEpsilon) {
  if (!(epsilon > 0.0)) fail_usage("log epsilon must be positive");
  LogImage out;
  out.epsilon = epsilon;
  for (int c = 0; c < 3; ++c) {
    Grid<double> ch(img.width(), img.height());
    for (std::size_t i = 0; i < img.pixel_count(); ++i)
      ch[i] = std::log(std::max(img.data()[3 * i + c], epsilon));
    out.channels[c] = std::move(ch);
  }
  return out;
}

/// IEC 61966-2-1 sRGB decode of one sample in [0, 1].
inline double srgb_to_linear(double v) {
  return v <= 0.04045 ? v / 12.92 : std::pow((v + 0.055) / 1.055, 2.4);
}

inline RgbImage decode_srgb(const RgbImage& img) {
  RgbImage out = img;
  for (double& v : out.data()) v = srgb_to_linear(v);
  return out;
}

inline RgbImage scaled(const RgbImage& img, double k) {
  RgbImage out = img;
  for (double& v : out.data()) v *= k;
  return out;
}

}  // namespace shadex

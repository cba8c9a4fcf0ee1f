#pragma once

// Raster file I/O: PFM for lossless float fields, PNG for integer input
// images, masks and min-max normalized previews.

#include <png.h>

#include <bit>
#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <sstream>
#include <string>
#include <vector>

#include "shadex/raster.hpp"

namespace shadex {

enum class Transfer { srgb, linear };

inline std::string to_string(Transfer t) {
  return t == Transfer::srgb ? "srgb" : "linear";
}

inline Transfer parse_transfer(const std::string& s) {
  if (s == "srgb") return Transfer::srgb;
  if (s == "linear") return Transfer::linear;
  fail_usage("unknown transfer '" + s + "' (expected srgb or linear)");
}

/// Raw float raster as stored in a PFM file (1 or 3 interleaved channels,
/// top row first in memory).
struct FloatRaster {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::vector<float> data;
};

namespace detail {

struct FileCloser {
  void operator()(std::FILE* f) const noexcept {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

inline float swap_bytes(float v) {
  std::uint32_t u;
  std::memcpy(&u, &v, sizeof u);
  u = ((u & 0x000000FFu) << 24) | ((u & 0x0000FF00u) << 8) |
      ((u & 0x00FF0000u) >> 8) | ((u & 0xFF000000u) >> 24);
  std::memcpy(&v, &u, sizeof v);
  return v;
}

inline std::string read_token(std::istream& in) {
  std::string tok;
  in >> tok;
  return tok;
}

}  // namespace detail

inline void write_pfm(const FloatRaster& r, const std::filesystem::path& path) {
  if (r.channels != 1 && r.channels != 3)
    fail_usage("PFM supports 1 or 3 channels");
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_data("cannot open '" + path.string() + "' for writing");
  out << (r.channels == 3 ? "PF" : "Pf") << '\n'
      << r.width << ' ' << r.height << '\n'
      << "-1.0\n";
  const std::size_t row = static_cast<std::size_t>(r.width) * r.channels;
  // PFM scanlines run bottom to top.
  for (int y = r.height - 1; y >= 0; --y) {
    const float* src = r.data.data() + static_cast<std::size_t>(y) * row;
    if constexpr (std::endian::native == std::endian::little) {
      out.write(reinterpret_cast<const char*>(src),
                static_cast<std::streamsize>(row * sizeof(float)));
    } else {
      for (std::size_t i = 0; i < row; ++i) {
        const float v = detail::swap_bytes(src[i]);
        out.write(reinterpret_cast<const char*>(&v), sizeof v);
      }
    }
  }
  if (!out) fail_data("write to '" + path.string() + "' failed");
}

inline FloatRaster read_pfm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail_data("cannot open '" + path.string() + "'");
  FloatRaster r;
  const std::string magic = detail::read_token(in);
  if (magic == "PF")
    r.channels = 3;
  else if (magic == "Pf")
    r.channels = 1;
  else
    fail_data("'" + path.string() + "' is not a PFM file");
  double scale = 0.0;
  if (!(in >> r.width >> r.height >> scale))
    fail_data("malformed PFM header in '" + path.string() + "'");
  if (r.width <= 0 || r.height <= 0)
    fail_data("zero-size image in '" + path.string() + "'");
  if (scale == 0.0) fail_data("PFM scale must be nonzero");
  in.get();  // single whitespace byte ends the header
  const bool little = scale < 0.0;
  const std::size_t row = static_cast<std::size_t>(r.width) * r.channels;
  r.data.resize(row * r.height);
  for (int y = r.height - 1; y >= 0; --y) {
    float* dst = r.data.data() + static_cast<std::size_t>(y) * row;
    in.read(reinterpret_cast<char*>(dst),
            static_cast<std::streamsize>(row * sizeof(float)));
    if (!in) fail_data("truncated PFM data in '" + path.string() + "'");
    if (little != (std::endian::native == std::endian::little))
      for (std::size_t i = 0; i < row; ++i) dst[i] = detail::swap_bytes(dst[i]);
  }
  return r;
}

/// Decoded PNG samples, always expanded to RGB.
struct PngPixels {
  int width = 0;
  int height = 0;
  int bit_depth = 8;  // 8 or 16
  std::vector<std::uint16_t> rgb;
};

namespace detail {

// libpng reports errors by longjmp; locals here stay trivially
// destructible and all owning storage belongs to the caller.
inline bool read_png_raw(std::FILE* fp, PngPixels& out,
                         std::vector<unsigned char>& buf,
                         std::vector<png_bytep>& rows, std::string& err) {
  png_structp png =
      png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) {
    err = "libpng initialization failed";
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    err = "corrupt PNG stream";
    return false;
  }
  png_init_io(png, fp);
  png_read_info(png, info);

  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (color != PNG_COLOR_TYPE_PALETTE && depth != 8 && depth != 16) {
    png_destroy_read_struct(&png, &info, nullptr);
    err = "unsupported bit depth " + std::to_string(depth);
    return false;
  }
  if (color == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(png);
  if (color == PNG_COLOR_TYPE_GRAY || color == PNG_COLOR_TYPE_GRAY_ALPHA)
    png_set_gray_to_rgb(png);
  if (color & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(png);
  if (depth == 16 && std::endian::native == std::endian::little)
    png_set_swap(png);
  png_read_update_info(png, info);

  const int out_depth = color == PNG_COLOR_TYPE_PALETTE ? 8 : depth;
  const std::size_t stride = png_get_rowbytes(png, info);
  buf.resize(stride * h);
  rows.resize(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = buf.data() + y * stride;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  out.width = static_cast<int>(w);
  out.height = static_cast<int>(h);
  out.bit_depth = out_depth;
  out.rgb.resize(static_cast<std::size_t>(w) * h * 3);
  for (png_uint_32 y = 0; y < h; ++y) {
    for (std::size_t i = 0; i < static_cast<std::size_t>(w) * 3; ++i) {
      std::uint16_t v;
      if (out_depth == 16)
        std::memcpy(&v, rows[y] + 2 * i, 2);
      else
        v = rows[y][i];
      out.rgb[y * static_cast<std::size_t>(w) * 3 + i] = v;
    }
  }
  return true;
}

inline bool write_png_raw(std::FILE* fp, int width, int height, int channels,
                          int depth, const std::vector<png_bytep>& rows,
                          std::string& err) {
  png_structp png =
      png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) {
    err = "libpng initialization failed";
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    err = "PNG encoding failed";
    return false;
  }
  png_init_io(png, fp);
  png_set_IHDR(png, info, static_cast<png_uint_32>(width),
               static_cast<png_uint_32>(height), depth,
               channels == 3 ? PNG_COLOR_TYPE_RGB : PNG_COLOR_TYPE_GRAY,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  if (depth == 16 && std::endian::native == std::endian::little)
    png_set_swap(png);
  png_write_image(png, const_cast<png_bytepp>(rows.data()));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

}  // namespace detail

inline PngPixels read_png(const std::filesystem::path& path) {
  detail::FilePtr fp(std::fopen(path.string().c_str(), "rb"));
  if (!fp) fail_data("cannot open '" + path.string() + "'");
  unsigned char sig[8] = {};
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0)
    fail_data("'" + path.string() + "' is not a PNG file");
  std::rewind(fp.get());
  PngPixels out;
  std::vector<unsigned char> buf;
  std::vector<png_bytep> rows;
  std::string err;
  if (!detail::read_png_raw(fp.get(), out, buf, rows, err))
    fail_data(path.string() + ": " + err);
  if (out.width == 0 || out.height == 0)
    fail_data("zero-size image in '" + path.string() + "'");
  return out;
}

/// Writes 1- or 3-channel samples (interleaved) at 8 or 16 bits.
inline void write_png(const std::filesystem::path& path, int width, int height,
                      int channels, int depth,
                      std::span<const std::uint16_t> samples) {
  if (channels != 1 && channels != 3) fail_usage("PNG export needs 1 or 3 channels");
  if (depth != 8 && depth != 16) fail_usage("PNG export needs 8 or 16 bits");
  if (samples.size() != static_cast<std::size_t>(width) * height * channels)
    fail_usage("PNG sample count does not match shape");
  const std::size_t bytes = depth / 8;
  const std::size_t stride = static_cast<std::size_t>(width) * channels * bytes;
  std::vector<unsigned char> buf(stride * height);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (depth == 16)
      std::memcpy(buf.data() + 2 * i, &samples[i], 2);
    else
      buf[i] = static_cast<unsigned char>(std::min<std::uint16_t>(samples[i], 255));
  }
  std::vector<png_bytep> rows(height);
  for (int y = 0; y < height; ++y) rows[y] = buf.data() + y * stride;

  detail::FilePtr fp(std::fopen(path.string().c_str(), "wb"));
  if (!fp) fail_data("cannot open '" + path.string() + "' for writing");
  std::string err;
  if (!detail::write_png_raw(fp.get(), width, height, channels, depth, rows, err))
    fail_data(path.string() + ": " + err);
}

inline bool is_pfm_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  char m[2] = {};
  in.read(m, 2);
  return in && m[0] == 'P' && (m[1] == 'F' || m[1] == 'f');
}

/// Loads a PNG (8/16-bit) or PFM as a linear RGB image. Integer samples map
/// to [0, 1]; the sRGB decode applies to integer formats only.
inline RgbImage load_image(const std::filesystem::path& path,
                           Transfer transfer = Transfer::linear) {
  if (!std::filesystem::exists(path))
    fail_data("no such file '" + path.string() + "'");
  if (is_pfm_file(path)) {
    const FloatRaster r = read_pfm(path);
    std::vector<double> data(static_cast<std::size_t>(r.width) * r.height * 3);
    for (std::size_t i = 0; i < data.size() / 3; ++i)
      for (int c = 0; c < 3; ++c)
        data[3 * i + c] = r.data[r.channels == 3 ? 3 * i + c : i];
    for (double v : data)
      if (!std::isfinite(v) || v < 0.0)
        fail_data("'" + path.string() + "' holds negative or non-finite values");
    return RgbImage(r.width, r.height, std::move(data));
  }
  const PngPixels px = read_png(path);
  const double max_code = px.bit_depth == 16 ? 65535.0 : 255.0;
  std::vector<double> data(px.rgb.size());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double v = px.rgb[i] / max_code;
    data[i] = transfer == Transfer::srgb ? srgb_to_linear(v) : v;
  }
  return RgbImage(px.width, px.height, std::move(data));
}

inline void save_field(const ScalarField& field, const std::filesystem::path& path,
                       double fill = 0.0) {
  FloatRaster r{field.width(), field.height(), 1, {}};
  r.data.resize(field.size());
  for (std::size_t i = 0; i < field.size(); ++i)
    r.data[i] = static_cast<float>(field.is_valid(i) ? field.values[i] : fill);
  write_pfm(r, path);
}

/// Loads a single-channel PFM; a 3-channel file is averaged to grey.
inline ScalarField load_field(const std::filesystem::path& path) {
  const FloatRaster r = read_pfm(path);
  Grid<double> g(r.width, r.height);
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (r.channels == 1) {
      g[i] = r.data[i];
    } else {
      g[i] = (static_cast<double>(r.data[3 * i]) + r.data[3 * i + 1] +
              r.data[3 * i + 2]) / 3.0;
    }
  }
  return ScalarField(std::move(g));
}

inline void save_rgb(const RgbImage& img, const std::filesystem::path& path) {
  FloatRaster r{img.width(), img.height(), 3, {}};
  r.data.assign(img.data().begin(), img.data().end());
  write_pfm(r, path);
}

inline void save_mask_png(const Mask& mask, const std::filesystem::path& path) {
  std::vector<std::uint16_t> s(mask.size());
  for (std::size_t i = 0; i < mask.size(); ++i) s[i] = mask[i] ? 255 : 0;
  write_png(path, mask.width(), mask.height(), 1, 8, s);
}

inline Mask load_mask_png(const std::filesystem::path& path) {
  const PngPixels px = read_png(path);
  Mask m(px.width, px.height);
  for (std::size_t i = 0; i < m.size(); ++i) m[i] = px.rgb[3 * i] != 0;
  return m;
}

namespace detail {

inline std::vector<std::uint16_t> normalize_to_8bit(std::span<const double> v,
                                                    std::span<const std::uint8_t> use) {
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!use.empty() && !use[i]) continue;
    if (!std::isfinite(v[i])) continue;
    lo = std::min(lo, v[i]);
    hi = std::max(hi, v[i]);
  }
  std::vector<std::uint16_t> out(v.size(), 0);
  if (!(hi > lo)) return out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if ((!use.empty() && !use[i]) || !std::isfinite(v[i])) continue;
    out[i] = static_cast<std::uint16_t>(std::lround(255.0 * (v[i] - lo) / (hi - lo)));
  }
  return out;
}

}  // namespace detail

/// Min-max normalized 8-bit preview; invalid pixels render black.
inline void save_preview_png(const ScalarField& field,
                             const std::filesystem::path& path) {
  std::vector<std::uint8_t> use;
  if (field.valid) use.assign(field.valid->data().begin(), field.valid->data().end());
  const auto s = detail::normalize_to_8bit(field.values.data(), use);
  write_png(path, field.width(), field.height(), 1, 8, s);
}

inline void save_preview_png(const RgbImage& img, const std::filesystem::path& path) {
  const auto s = detail::normalize_to_8bit(img.data(), {});
  write_png(path, img.width(), img.height(), 3, 8, s);
}

}  // namespace shadex

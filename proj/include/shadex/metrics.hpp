#pragma once

// Evaluation metrics for intrinsic decompositions: MSE after least-squares
// brightness alignment, local MSE over half-overlapping windows, and the
// weighted human disagreement rate on relative reflectance judgments.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "shadex/error.hpp"
#include "shadex/raster.hpp"

namespace shadex {

/// A view over interleaved samples with `channels` values per pixel and an
/// optional per-pixel mask (empty = all pixels count).
struct MetricView {
  int width = 0;
  int height = 0;
  int channels = 1;
  std::span<const double> samples;
  std::span<const std::uint8_t> use;

  MetricView(const ScalarField& f)  // NOLINT(google-explicit-constructor)
      : width(f.width()), height(f.height()), channels(1), samples(f.values.data()) {
    if (f.valid) use = f.valid->data();
  }
  MetricView(const RgbImage& img)  // NOLINT(google-explicit-constructor)
      : width(img.width()), height(img.height()), channels(3), samples(img.data()) {}
  MetricView(const RgbImage& img, const Mask& mask)
      : width(img.width()), height(img.height()), channels(3), samples(img.data()),
        use(mask.data()) {
    if (mask.width() != img.width() || mask.height() != img.height())
      fail_usage("metric mask shape differs from image");
  }

  bool counts(std::size_t pixel) const { return use.empty() || use[pixel] != 0; }
};

namespace detail {

inline void require_same_shape(const MetricView& a, const MetricView& b) {
  if (a.width != b.width || a.height != b.height || a.channels != b.channels)
    fail_data("prediction and ground truth differ in shape (" + std::to_string(a.width) +
              "x" + std::to_string(a.height) + "x" + std::to_string(a.channels) + " vs " +
              std::to_string(b.width) + "x" + std::to_string(b.height) + "x" +
              std::to_string(b.channels) + ")");
}

inline bool both_count(const MetricView& a, const MetricView& b, std::size_t pixel) {
  return a.counts(pixel) && b.counts(pixel);
}

}  // namespace detail

/// alpha = sum(pred * gt) / sum(pred^2), the minimizer of sum (alpha*pred - gt)^2.
inline double scale_align(const MetricView& pred, const MetricView& gt) {
  detail::require_same_shape(pred, gt);
  double pg = 0.0;
  double pp = 0.0;
  const std::size_t pixels = static_cast<std::size_t>(pred.width) * pred.height;
  for (std::size_t i = 0; i < pixels; ++i) {
    if (!detail::both_count(pred, gt, i)) continue;
    for (int c = 0; c < pred.channels; ++c) {
      const double p = pred.samples[i * pred.channels + c];
      pg += p * gt.samples[i * pred.channels + c];
      pp += p * p;
    }
  }
  if (!(pp > 0.0)) fail_data("prediction is zero everywhere; brightness alignment undefined");
  return pg / pp;
}

/// Mean over pixels and channels of (alpha*pred - gt)^2 with one shared alpha.
inline double mse_scaled(const MetricView& pred, const MetricView& gt) {
  const double alpha = scale_align(pred, gt);
  double acc = 0.0;
  std::size_t n = 0;
  const std::size_t pixels = static_cast<std::size_t>(pred.width) * pred.height;
  for (std::size_t i = 0; i < pixels; ++i) {
    if (!detail::both_count(pred, gt, i)) continue;
    for (int c = 0; c < pred.channels; ++c) {
      const double d = alpha * pred.samples[i * pred.channels + c] -
                       gt.samples[i * pred.channels + c];
      acc += d * d;
      ++n;
    }
  }
  return acc / static_cast<double>(n);
}

inline constexpr int kDefaultLmseWindow = 20;

/// Local MSE: windows of `window` pixels tiled with stride window/2, each
/// brightness-aligned on its own. The summed squared error is normalized
/// by the summed ground-truth energy; windows with zero ground truth are
/// skipped.
inline double lmse(const MetricView& pred, const MetricView& gt,
                   int window = kDefaultLmseWindow) {
  detail::require_same_shape(pred, gt);
  if (window < 2) fail_usage("LMSE window must be at least 2");
  if (pred.width < window || pred.height < window)
    fail_data("image is smaller than one LMSE window (" + std::to_string(window) + ")");
  const int stride = window / 2;
  const int ch = pred.channels;
  double err_total = 0.0;
  double energy_total = 0.0;
  for (int y0 = 0; y0 + window <= pred.height; y0 += stride) {
    for (int x0 = 0; x0 + window <= pred.width; x0 += stride) {
      double pg = 0.0, pp = 0.0, gg = 0.0;
      for (int y = y0; y < y0 + window; ++y) {
        for (int x = x0; x < x0 + window; ++x) {
          const std::size_t px = static_cast<std::size_t>(y) * pred.width + x;
          if (!detail::both_count(pred, gt, px)) continue;
          for (int c = 0; c < ch; ++c) {
            const double p = pred.samples[px * ch + c];
            const double g = gt.samples[px * ch + c];
            pg += p * g;
            pp += p * p;
            gg += g * g;
          }
        }
      }
      if (gg == 0.0) continue;
      const double alpha = pp > 0.0 ? pg / pp : 0.0;
      double err = 0.0;
      for (int y = y0; y < y0 + window; ++y) {
        for (int x = x0; x < x0 + window; ++x) {
          const std::size_t px = static_cast<std::size_t>(y) * pred.width + x;
          if (!detail::both_count(pred, gt, px)) continue;
          for (int c = 0; c < ch; ++c) {
            const double d = alpha * pred.samples[px * ch + c] - gt.samples[px * ch + c];
            err += d * d;
          }
        }
      }
      err_total += err;
      energy_total += gg;
    }
  }
  if (energy_total == 0.0) fail_data("ground truth is zero in every LMSE window");
  return err_total / energy_total;
}

// ---------------------------------------------------------------------------
// WHDR
// ---------------------------------------------------------------------------

enum class Darker { first, second, equal };

struct Judgment {
  int x1 = 0, y1 = 0;
  int x2 = 0, y2 = 0;
  Darker darker = Darker::equal;
  double weight = 1.0;
};

using JudgmentSet = std::vector<Judgment>;

inline constexpr double kDefaultWhdrDelta = 0.1;
inline constexpr double kLuminanceFloor = 1e-6;

inline double luminance(const Rgb& c) { return 0.299 * c[0] + 0.587 * c[1] + 0.114 * c[2]; }

inline Darker predict_relation(const RgbImage& albedo, const Judgment& j, double delta) {
  const double l1 = std::max(luminance(albedo.pixel(j.x1, j.y1)), kLuminanceFloor);
  const double l2 = std::max(luminance(albedo.pixel(j.x2, j.y2)), kLuminanceFloor);
  const double r = l1 / l2;
  if (r > 1.0 + delta) return Darker::second;
  if (r < 1.0 / (1.0 + delta)) return Darker::first;
  return Darker::equal;
}

inline double whdr(const RgbImage& albedo, const JudgmentSet& judgments,
                   double delta = kDefaultWhdrDelta) {
  if (judgments.empty()) fail_data("WHDR needs at least one judgment");
  double total = 0.0;
  double wrong = 0.0;
  for (const Judgment& j : judgments) {
    if (!(std::isfinite(j.weight) && j.weight >= 0.0))
      fail_data("judgment weights must be finite and non-negative");
    if (j.x1 < 0 || j.y1 < 0 || j.x2 < 0 || j.y2 < 0 || j.x1 >= albedo.width() ||
        j.x2 >= albedo.width() || j.y1 >= albedo.height() || j.y2 >= albedo.height())
      fail_data("judgment point lies outside the image");
    total += j.weight;
    if (predict_relation(albedo, j, delta) != j.darker) wrong += j.weight;
  }
  if (!(total > 0.0)) fail_data("judgments have zero total weight");
  return wrong / total;
}

/// Parses [{"p1": [x, y], "p2": [x, y], "darker": "1"|"2"|"E", "weight": w}]
/// with coordinates normalized to [0, 1], scaled to a w x h image.
inline JudgmentSet judgments_from_json(const nlohmann::json& doc, int width, int height) {
  if (!doc.is_array()) fail_data("judgment document must be a JSON array");
  JudgmentSet out;
  auto to_pixel = [](double v, int extent) {
    if (!(v >= 0.0 && v <= 1.0)) fail_data("judgment coordinates must lie in [0, 1]");
    return std::min(static_cast<int>(v * extent), extent - 1);
  };
  try {
    for (const auto& item : doc) {
      Judgment j;
      const auto p1 = item.at("p1").get<std::array<double, 2>>();
      const auto p2 = item.at("p2").get<std::array<double, 2>>();
      j.x1 = to_pixel(p1[0], width);
      j.y1 = to_pixel(p1[1], height);
      j.x2 = to_pixel(p2[0], width);
      j.y2 = to_pixel(p2[1], height);
      const std::string d = item.at("darker").get<std::string>();
      if (d == "1")
        j.darker = Darker::first;
      else if (d == "2")
        j.darker = Darker::second;
      else if (d == "E")
        j.darker = Darker::equal;
      else
        fail_data("judgment 'darker' must be \"1\", \"2\" or \"E\"");
      j.weight = item.value("weight", 1.0);
      out.push_back(j);
    }
  } catch (const nlohmann::json::exception& e) {
    fail_data(std::string("invalid judgment document: ") + e.what());
  }
  return out;
}

inline JudgmentSet load_judgments(const std::filesystem::path& path, int width, int height) {
  std::ifstream in(path);
  if (!in) fail_data("cannot open '" + path.string() + "'");
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::exception& e) {
    fail_data(path.string() + ": " + e.what());
  }
  return judgments_from_json(doc, width, height);
}

}  // namespace shadex

#pragma once

// Photometric descriptors: log-chromaticity ratio gradients, the albedo
// gradient index (AGI), the homogeneity mask derived from it, masked
// shading gradients and the shading gradient index (SGI).

#include <array>
#include <cmath>
#include <string>
#include <vector>

#include "shadex/parallel.hpp"
#include "shadex/raster.hpp"

namespace shadex {

enum class FilterKind { gaussian_derivative, central_difference };
enum class GradientMode { log, linear };

inline std::string to_string(FilterKind k) {
  return k == FilterKind::gaussian_derivative ? "gaussian_derivative"
                                              : "central_difference";
}
inline FilterKind parse_filter_kind(const std::string& s) {
  if (s == "gaussian_derivative") return FilterKind::gaussian_derivative;
  if (s == "central_difference") return FilterKind::central_difference;
  fail_usage("unknown filter kind '" + s + "'");
}
inline std::string to_string(GradientMode m) {
  return m == GradientMode::log ? "log" : "linear";
}
inline GradientMode parse_gradient_mode(const std::string& s) {
  if (s == "log") return GradientMode::log;
  if (s == "linear") return GradientMode::linear;
  fail_usage("unknown gradient mode '" + s + "'");
}

struct FilterSpec {
  FilterKind kind = FilterKind::gaussian_derivative;
  double sigma = 1.0;       // gaussian only
  double truncation = 3.0;  // kernel half-width in multiples of sigma

  friend bool operator==(const FilterSpec&, const FilterSpec&) = default;
};

/// Separable derivative filter: `derivative` runs along the differentiated
/// axis, `smoothing` across it. Both are odd-length and centered.
///
/// The derivative taps are antisymmetric (so they sum to zero) and scaled
/// so that sum_i d[i] * i == 1, i.e. a unit-slope ramp responds with 1.
struct SeparableKernel {
  std::vector<double> derivative;
  std::vector<double> smoothing;

  int derivative_radius() const { return static_cast<int>(derivative.size() / 2); }
  int smoothing_radius() const { return static_cast<int>(smoothing.size() / 2); }
};

inline SeparableKernel make_kernel(const FilterSpec& spec) {
  SeparableKernel k;
  if (spec.kind == FilterKind::central_difference) {
    k.derivative = {-0.5, 0.0, 0.5};
    k.smoothing = {1.0};
    return k;
  }
  if (!(spec.sigma > 0.0)) fail_usage("gaussian sigma must be positive");
  if (!(spec.truncation > 0.0)) fail_usage("filter truncation must be positive");
  const int r = std::max(1, static_cast<int>(std::ceil(spec.truncation * spec.sigma)));
  const int n = 2 * r + 1;
  k.derivative.assign(n, 0.0);
  k.smoothing.assign(n, 0.0);
  auto g = [&](int i) { return std::exp(-0.5 * i * i / (spec.sigma * spec.sigma)); };

  double gsum = g(0);
  double moment = 0.0;
  for (int i = 1; i <= r; ++i) {
    gsum += 2.0 * g(i);
    moment += 2.0 * i * i * g(i);
  }
  for (int i = -r; i <= r; ++i) k.smoothing[i + r] = g(i) / gsum;
  for (int i = 1; i <= r; ++i) {
    const double d = i * g(i) / moment;
    k.derivative[r + i] = d;
    k.derivative[r - i] = -d;
  }
  return k;
}

enum class Axis { x, y };

/// Derivative response along `axis` with replicate padding.
inline Grid<double> filter_response(const Grid<double>& f, const SeparableKernel& k,
                                    Axis axis) {
  const int w = f.width();
  const int h = f.height();
  const int rd = k.derivative_radius();
  const int rs = k.smoothing_radius();
  auto cx = [w](int x) { return std::clamp(x, 0, w - 1); };
  auto cy = [h](int y) { return std::clamp(y, 0, h - 1); };

  // Smooth across the derivative axis first, then differentiate.
  Grid<double> smooth(w, h);
  parallel_for(h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      double acc = 0.0;
      for (int j = -rs; j <= rs; ++j) {
        const double v = axis == Axis::x ? f(x, cy(y + j)) : f(cx(x + j), y);
        acc += k.smoothing[j + rs] * v;
      }
      smooth(x, y) = acc;
    }
  });
  Grid<double> out(w, h);
  parallel_for(h, [&](int y) {
    for (int x = 0; x < w; ++x) {
      // Taps are antisymmetric; pairing them keeps flat regions exactly 0.
      double acc = 0.0;
      for (int i = 1; i <= rd; ++i) {
        const double d = axis == Axis::x ? smooth(cx(x + i), y) - smooth(cx(x - i), y)
                                         : smooth(x, cy(y + i)) - smooth(x, cy(y - i));
        acc += k.derivative[i + rd] * d;
      }
      out(x, y) = acc;
    }
  });
  return out;
}

/// Signed per-axis derivative field with a validity mask.
struct GradientField {
  Grid<double> gx;
  Grid<double> gy;
  Mask valid;

  int width() const noexcept { return gx.width(); }
  int height() const noexcept { return gx.height(); }
};

namespace detail {

inline GradientField full_gradient(const Grid<double>& f, const SeparableKernel& k) {
  return GradientField{filter_response(f, k, Axis::x), filter_response(f, k, Axis::y),
                       Mask(f.width(), f.height(), 1)};
}

inline Grid<double> difference(const Grid<double>& a, const Grid<double>& b) {
  Grid<double> out(a.width(), a.height());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

inline void require_nonempty(const RgbImage& img) {
  if (img.empty()) fail_data("image is empty");
}

}  // namespace detail

/// Gradients of the three log-chromaticity ratios log(R/G), log(R/B),
/// log(G/B). Geometry, light intensity and light colour cancel in each.
inline std::array<GradientField, 3> log_ratio_gradients(
    const RgbImage& img, const FilterSpec& filt = {},
    double epsilon = kDefaultEpsilon) {
  detail::require_nonempty(img);
  const SeparableKernel k = make_kernel(filt);
  const LogImage li = to_log(img, epsilon);
  const auto& [lr, lg, lb] = li.channels;
  return {detail::full_gradient(detail::difference(lr, lg), k),
          detail::full_gradient(detail::difference(lr, lb), k),
          detail::full_gradient(detail::difference(lg, lb), k)};
}

/// AGI(x) = sqrt(sum_i m_ix^2 + m_iy^2) over the three ratio gradients.
inline ScalarField albedo_gradient_index(const RgbImage& img, const FilterSpec& filt = {},
                                         double epsilon = kDefaultEpsilon) {
  const auto m = log_ratio_gradients(img, filt, epsilon);
  Grid<double> agi(img.width(), img.height());
  for (std::size_t i = 0; i < agi.size(); ++i) {
    double acc = 0.0;
    for (const auto& g : m) acc += g.gx[i] * g.gx[i] + g.gy[i] * g.gy[i];
    agi[i] = std::sqrt(acc);
  }
  return ScalarField(std::move(agi));
}

struct HomogeneityMask {
  Mask keep;  // true where albedo is locally constant
  double threshold = 0.0;

  int width() const noexcept { return keep.width(); }
  int height() const noexcept { return keep.height(); }
};

inline constexpr double kDefaultAgiThreshold = 0.05;

inline HomogeneityMask homogeneity_mask(const ScalarField& agi, double threshold) {
  if (!(threshold >= 0.0)) fail_usage("AGI threshold must be non-negative");
  HomogeneityMask m{Mask(agi.width(), agi.height()), threshold};
  for (std::size_t i = 0; i < agi.size(); ++i)
    m.keep[i] = agi.values[i] <= threshold ? 1 : 0;
  return m;
}

/// Binary erosion by a (2rx+1) x (2ry+1) box; pixels outside the raster
/// count as false.
inline Mask erode_box(const Mask& m, int rx, int ry) {
  const int w = m.width();
  const int h = m.height();
  Mask horiz(w, h);
  for (int y = 0; y < h; ++y) {
    int run = 0;  // length of the true run ending at the current pixel
    std::vector<int> run_end(w);
    for (int x = 0; x < w; ++x) {
      run = m(x, y) ? run + 1 : 0;
      run_end[x] = run;
    }
    for (int x = 0; x < w; ++x) {
      const int right = x + rx;
      horiz(x, y) = right < w && x - rx >= 0 && run_end[right] >= 2 * rx + 1;
    }
  }
  Mask out(w, h);
  for (int x = 0; x < w; ++x) {
    int run = 0;
    std::vector<int> run_end(h);
    for (int y = 0; y < h; ++y) {
      run = horiz(x, y) ? run + 1 : 0;
      run_end[y] = run;
    }
    for (int y = 0; y < h; ++y) {
      const int bottom = y + ry;
      out(x, y) = bottom < h && y - ry >= 0 && run_end[bottom] >= 2 * ry + 1;
    }
  }
  return out;
}

/// Pixels whose x- and y-derivative footprints both lie inside `usable`.
inline Mask support_inside(const Mask& usable, const SeparableKernel& k) {
  const int rd = k.derivative_radius();
  const int rs = k.smoothing_radius();
  const Mask ex = erode_box(usable, rd, rs);
  const Mask ey = erode_box(usable, rs, rd);
  Mask out(usable.width(), usable.height());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = ex[i] && ey[i];
  return out;
}

/// Channel-averaged signed shading derivatives, valid only where the whole
/// filter support sits on kept pixels with no channel below `epsilon`.
inline GradientField shading_gradients(const RgbImage& img, const HomogeneityMask& mask,
                                       const FilterSpec& filt = {},
                                       GradientMode mode = GradientMode::log,
                                       double epsilon = kDefaultEpsilon) {
  detail::require_nonempty(img);
  if (mask.width() != img.width() || mask.height() != img.height())
    fail_usage("homogeneity mask shape differs from image");
  const SeparableKernel k = make_kernel(filt);

  std::array<Grid<double>, 3> chans;
  if (mode == GradientMode::log) {
    chans = to_log(img, epsilon).channels;
  } else {
    for (int c = 0; c < 3; ++c) chans[c] = img.channel(c);
  }
  GradientField out{Grid<double>(img.width(), img.height()),
                    Grid<double>(img.width(), img.height()), Mask()};
  std::array<Grid<double>, 3> rx, ry;
  for (int c = 0; c < 3; ++c) {
    rx[c] = filter_response(chans[c], k, Axis::x);
    ry[c] = filter_response(chans[c], k, Axis::y);
  }
  for (std::size_t i = 0; i < out.gx.size(); ++i) {
    out.gx[i] = (rx[0][i] + rx[1][i] + rx[2][i]) / 3.0;
    out.gy[i] = (ry[0][i] + ry[1][i] + ry[2][i]) / 3.0;
  }

  Mask usable(img.width(), img.height());
  const auto d = img.data();
  for (std::size_t i = 0; i < usable.size(); ++i) {
    const bool lit = d[3 * i] >= epsilon && d[3 * i + 1] >= epsilon && d[3 * i + 2] >= epsilon;
    usable[i] = mask.keep[i] && lit;
  }
  out.valid = support_inside(usable, k);
  for (std::size_t i = 0; i < out.gx.size(); ++i) {
    if (!out.valid[i]) {
      out.gx[i] = 0.0;
      out.gy[i] = 0.0;
    }
  }
  return out;
}

/// SGI(x) = sqrt(sum_c dx I_c^2 + dy I_c^2) on the linear channels.
inline ScalarField shading_gradient_index(const RgbImage& img, const FilterSpec& filt = {}) {
  detail::require_nonempty(img);
  const SeparableKernel k = make_kernel(filt);
  Grid<double> sgi(img.width(), img.height());
  for (int c = 0; c < 3; ++c) {
    const Grid<double> ch = img.channel(c);
    const Grid<double> gx = filter_response(ch, k, Axis::x);
    const Grid<double> gy = filter_response(ch, k, Axis::y);
    for (std::size_t i = 0; i < sgi.size(); ++i) sgi[i] += gx[i] * gx[i] + gy[i] * gy[i];
  }
  for (double& v : sgi.data()) v = std::sqrt(v);
  return ScalarField(std::move(sgi));
}

}  // namespace shadex

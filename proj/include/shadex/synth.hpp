#pragma once

// Synthetic Lambertian scenes with exact intrinsics: image = shading * albedo
// per channel, where shading = (max(n.l, 0) + ambient) * light colour.

#include <array>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "shadex/io.hpp"
#include "shadex/raster.hpp"

namespace shadex {

using Vec3 = std::array<double, 3>;

inline double dot3(const Vec3& a, const Vec3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}
inline double norm3(const Vec3& a) { return std::sqrt(dot3(a, a)); }

/// Multiplies shading by `factor` on the side of the line
/// normal . (x, y) > offset, modelling a non-coloured cast shadow.
struct HalfPlaneShadow {
  std::array<double, 2> normal{1.0, 0.0};
  double offset = 0.0;
  double factor = 0.5;

  bool covers(int x, int y) const { return normal[0] * x + normal[1] * y > offset; }
};

struct SceneSpec {
  RgbImage albedo;
  Grid<Vec3> normals;
  Vec3 light_dir{0.0, 0.0, 1.0};
  Rgb light_color{1.0, 1.0, 1.0};
  double ambient = 0.0;
  std::optional<HalfPlaneShadow> shadow;

  void validate() const {
    if (albedo.empty()) fail_data("scene albedo is empty");
    if (normals.width() != albedo.width() || normals.height() != albedo.height())
      fail_data("scene normals and albedo differ in shape");
    for (double v : albedo.data())
      if (!(v >= 0.0 && v <= 1.0)) fail_data("scene albedo must lie in [0, 1]");
    for (const Vec3& n : normals.data())
      if (std::abs(norm3(n) - 1.0) > 1e-6) fail_data("scene normals must be unit length");
    if (std::abs(norm3(light_dir) - 1.0) > 1e-6) fail_data("light_dir must be unit length");
    for (double e : light_color)
      if (!std::isfinite(e) || e < 0.0) fail_data("light_color must be finite and non-negative");
    if (!std::isfinite(ambient) || ambient < 0.0) fail_data("ambient must be non-negative");
    if (shadow && !(shadow->factor >= 0.0)) fail_data("shadow factor must be non-negative");
  }
};

struct RenderedTriple {
  RgbImage image;
  RgbImage shading;  // per channel, shading * light colour
  RgbImage albedo;
  ScalarField geometric;  // colour-free term (max(n.l,0) + ambient) * shadow
  bool chromatic = false;

  /// Single-channel shading: the channel value when light is achromatic,
  /// otherwise the colour-free term.
  ScalarField grey_shading() const {
    return chromatic ? geometric : ScalarField(shading.channel(0));
  }
};

inline RenderedTriple render(const SceneSpec& spec) {
  spec.validate();
  const int w = spec.albedo.width();
  const int h = spec.albedo.height();
  RenderedTriple out{RgbImage(w, h), RgbImage(w, h), spec.albedo,
                     ScalarField(w, h), false};
  out.chromatic = !(spec.light_color[0] == spec.light_color[1] &&
                    spec.light_color[1] == spec.light_color[2]);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      double m = std::max(dot3(spec.normals(x, y), spec.light_dir), 0.0) + spec.ambient;
      if (spec.shadow && spec.shadow->covers(x, y)) m *= spec.shadow->factor;
      out.geometric(x, y) = m;
      for (int c = 0; c < 3; ++c) {
        const double s = m * spec.light_color[c];
        out.shading.at(x, y, c) = s;
        out.image.at(x, y, c) = s * spec.albedo.at(x, y, c);
      }
    }
  }
  return out;
}

struct SphereGeometry {
  Grid<Vec3> normals;
  Mask inside;
};

/// Hemisphere of the given radius centred in the raster, facing +z.
/// Normals use image axes (x right, y down); outside the disk they are
/// (0, 0, 1).
inline SphereGeometry sphere_normals(int w, int h, double radius) {
  if (w <= 0 || h <= 0) fail_usage("sphere raster must be nonempty");
  if (!(radius > 0.0) || 2.0 * radius > std::min(w, h))
    fail_usage("sphere radius must be positive and fit the raster");
  SphereGeometry g{Grid<Vec3>(w, h, Vec3{0.0, 0.0, 1.0}), Mask(w, h)};
  const double cx = 0.5 * (w - 1);
  const double cy = 0.5 * (h - 1);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double dx = (x - cx) / radius;
      const double dy = (y - cy) / radius;
      const double r2 = dx * dx + dy * dy;
      if (r2 > 1.0) continue;
      g.normals(x, y) = {dx, dy, std::sqrt(1.0 - r2)};
      g.inside(x, y) = 1;
    }
  }
  return g;
}

inline Grid<Vec3> flat_normals(int w, int h) { return Grid<Vec3>(w, h, Vec3{0.0, 0.0, 1.0}); }

/// Portable uniform draws on top of mt19937_64 (the standard distributions
/// are implementation-defined).
class SceneRng {
 public:
  explicit SceneRng(std::uint64_t seed) : gen_(seed) {}
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  int integer(int lo, int hi) {  // inclusive
    return lo + static_cast<int>(uniform() * (hi - lo + 1));
  }

 private:
  std::mt19937_64 gen_;
};

struct MondrianLayout {
  Grid<int> patch;  // index into colors
  std::vector<Rgb> colors;
};

/// Background patch plus `patches - 1` overlaid axis-aligned rectangles.
/// Colours are drawn with distinct chromaticities so every boundary is a
/// chromatic edge.
inline MondrianLayout mondrian_layout(std::uint64_t seed, int patches, int w, int h) {
  if (patches < 1) fail_usage("mondrian needs at least one patch");
  if (w <= 0 || h <= 0) fail_usage("mondrian raster must be nonempty");
  SceneRng rng(seed);
  MondrianLayout out{Grid<int>(w, h, 0), {}};
  auto chroma = [](const Rgb& c) {
    return std::array<double, 2>{std::log(c[0] / c[1]), std::log(c[2] / c[1])};
  };
  for (int k = 0; k < patches; ++k) {
    Rgb best{};
    double best_sep = -1.0;
    for (int attempt = 0; attempt < 200; ++attempt) {
      const Rgb c{rng.uniform(0.15, 0.95), rng.uniform(0.15, 0.95), rng.uniform(0.15, 0.95)};
      double sep = 1e9;
      for (const Rgb& o : out.colors) {
        const auto a = chroma(c);
        const auto b = chroma(o);
        sep = std::min(sep, std::hypot(a[0] - b[0], a[1] - b[1]));
      }
      if (sep > best_sep) {
        best = c;
        best_sep = sep;
      }
      if (sep >= 0.35) break;
    }
    out.colors.push_back(best);
    if (k == 0) continue;
    const int rw = rng.integer(std::max(1, w / 8), std::max(1, w / 2));
    const int rh = rng.integer(std::max(1, h / 8), std::max(1, h / 2));
    const int x0 = rng.integer(0, w - rw);
    const int y0 = rng.integer(0, h - rh);
    for (int y = y0; y < y0 + rh; ++y)
      for (int x = x0; x < x0 + rw; ++x) out.patch(x, y) = k;
  }
  return out;
}

inline RgbImage mondrian_albedo(std::uint64_t seed, int patches, int w, int h) {
  const MondrianLayout layout = mondrian_layout(seed, patches, w, h);
  RgbImage out(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) out.set_pixel(x, y, layout.colors[layout.patch(x, y)]);
  return out;
}

// ---------------------------------------------------------------------------
// JSON scene documents
//
//   {
//     "width": 256, "height": 256,
//     "albedo":  {"kind": "mondrian", "seed": 7, "patches": 8}
//              | {"kind": "uniform", "rgb": [r, g, b]}
//              | {"kind": "file", "path": "albedo.pfm"},
//     "normals": {"kind": "sphere", "radius": 110} | {"kind": "flat"},
//     "light_dir": [x, y, z],          // normalized on load
//     "light_color": [r, g, b],
//     "ambient": 0.1,
//     "shadow": {"normal": [nx, ny], "offset": c, "factor": f}   // optional
//   }
// ---------------------------------------------------------------------------

inline SceneSpec scene_from_json(const nlohmann::json& j,
                                 const std::filesystem::path& base_dir = {}) {
  try {
    SceneSpec spec;
    const auto& alb = j.at("albedo");
    const std::string akind = alb.at("kind").get<std::string>();
    int w = j.value("width", 0);
    int h = j.value("height", 0);
    if (akind == "file") {
      std::filesystem::path p = alb.at("path").get<std::string>();
      if (p.is_relative()) p = base_dir / p;
      spec.albedo = load_image(p);
      w = spec.albedo.width();
      h = spec.albedo.height();
    } else {
      if (w <= 0 || h <= 0) fail_data("scene width and height must be positive");
      if (akind == "mondrian") {
        spec.albedo = mondrian_albedo(alb.at("seed").get<std::uint64_t>(),
                                      alb.at("patches").get<int>(), w, h);
      } else if (akind == "uniform") {
        const auto rgb = alb.at("rgb").get<std::array<double, 3>>();
        spec.albedo = RgbImage(w, h, rgb);
      } else {
        fail_data("unknown albedo kind '" + akind + "'");
      }
    }
    const auto& nrm = j.at("normals");
    const std::string nkind = nrm.at("kind").get<std::string>();
    if (nkind == "sphere")
      spec.normals = sphere_normals(w, h, nrm.at("radius").get<double>()).normals;
    else if (nkind == "flat")
      spec.normals = flat_normals(w, h);
    else
      fail_data("unknown normals kind '" + nkind + "'");

    Vec3 l = j.value("light_dir", Vec3{0.0, 0.0, 1.0});
    const double ln = norm3(l);
    if (!(ln > 0.0)) fail_data("light_dir must be nonzero");
    for (double& v : l) v /= ln;
    spec.light_dir = l;
    spec.light_color = j.value("light_color", Rgb{1.0, 1.0, 1.0});
    spec.ambient = j.value("ambient", 0.0);
    if (j.contains("shadow")) {
      const auto& s = j.at("shadow");
      HalfPlaneShadow sh;
      sh.normal = s.at("normal").get<std::array<double, 2>>();
      sh.offset = s.at("offset").get<double>();
      sh.factor = s.at("factor").get<double>();
      spec.shadow = sh;
    }
    spec.validate();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    fail_data(std::string("invalid scene document: ") + e.what());
  }
}

/// Overrides the mondrian seed of a scene document, if it has one.
inline void apply_seed(nlohmann::json& scene, std::uint64_t seed) {
  if (scene.contains("albedo") && scene["albedo"].value("kind", "") == "mondrian")
    scene["albedo"]["seed"] = seed;
}

}  // namespace shadex

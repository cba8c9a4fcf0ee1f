#pragma once

// The full decomposition: AGI -> homogeneity mask -> masked shading
// gradients -> sparse least-squares shading -> dense completion -> albedo.

#include <chrono>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "shadex/complete.hpp"
#include "shadex/descriptors.hpp"
#include "shadex/integrate.hpp"
#include "shadex/io.hpp"
#include "shadex/metrics.hpp"
#include "shadex/raster.hpp"

namespace shadex {

inline constexpr double kShadingFloor = 1e-4;

struct PipelineConfig {
  double epsilon = kDefaultEpsilon;
  FilterSpec filter;
  double agi_threshold = kDefaultAgiThreshold;
  GradientMode gradient_mode = GradientMode::log;
  CompletionConfig completion;
  bool chromatic_shading = false;
  Transfer transfer = Transfer::linear;
  IntegrationOptions integration;
  bool bridge_gauges = true;
  int bridge_max_gap = BridgeOptions{}.max_gap;

  void validate() const {
    if (!(epsilon > 0.0)) fail_usage("epsilon must be positive");
    make_kernel(filter);
    if (!(agi_threshold >= 0.0)) fail_usage("agi_threshold must be non-negative");
    completion.validate();
    if (!(integration.tol > 0.0 && integration.tol < 1.0))
      fail_usage("integration tol must lie in (0, 1)");
    if (integration.iteration_cap == 0) fail_usage("integration iteration_cap must be positive");
    if (bridge_max_gap < 1) fail_usage("bridge_max_gap must be at least 1");
  }

  friend bool operator==(const PipelineConfig& a, const PipelineConfig& b) {
    return a.epsilon == b.epsilon && a.filter == b.filter &&
           a.agi_threshold == b.agi_threshold && a.gradient_mode == b.gradient_mode &&
           a.completion == b.completion && a.chromatic_shading == b.chromatic_shading &&
           a.transfer == b.transfer && a.integration.tol == b.integration.tol &&
           a.integration.iteration_cap == b.integration.iteration_cap &&
           a.bridge_gauges == b.bridge_gauges && a.bridge_max_gap == b.bridge_max_gap;
  }
};

inline nlohmann::json to_json(const PipelineConfig& c) {
  return {
      {"epsilon", c.epsilon},
      {"filter",
       {{"kind", to_string(c.filter.kind)},
        {"sigma", c.filter.sigma},
        {"truncation", c.filter.truncation}}},
      {"agi_threshold", c.agi_threshold},
      {"gradient_mode", to_string(c.gradient_mode)},
      {"completion",
       {{"lambda_data", c.completion.lambda_data},
        {"lambda_smooth", c.completion.lambda_smooth},
        {"tol", c.completion.tol},
        {"max_iter", c.completion.max_iter}}},
      {"integration",
       {{"tol", c.integration.tol}, {"iteration_cap", c.integration.iteration_cap}}},
      {"bridge_gauges", c.bridge_gauges},
      {"bridge_max_gap", c.bridge_max_gap},
      {"chromatic_shading", c.chromatic_shading},
      {"transfer", to_string(c.transfer)},
  };
}

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& j,
                                std::initializer_list<const char*> known,
                                const std::string& where) {
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) fail_usage("unknown config field '" + where + key + "'");
  }
}

}  // namespace detail

/// Missing fields keep their defaults; unknown fields are rejected.
inline PipelineConfig config_from_json(const nlohmann::json& j) {
  PipelineConfig c;
  if (!j.is_object()) fail_usage("config must be a JSON object");
  try {
    detail::reject_unknown_keys(j,
                                {"epsilon", "filter", "agi_threshold", "gradient_mode",
                                 "completion", "integration", "bridge_gauges",
                                 "bridge_max_gap", "chromatic_shading", "transfer"},
                                "");
    c.epsilon = j.value("epsilon", c.epsilon);
    if (j.contains("filter")) {
      const auto& f = j.at("filter");
      detail::reject_unknown_keys(f, {"kind", "sigma", "truncation"}, "filter.");
      if (f.contains("kind")) c.filter.kind = parse_filter_kind(f.at("kind").get<std::string>());
      c.filter.sigma = f.value("sigma", c.filter.sigma);
      c.filter.truncation = f.value("truncation", c.filter.truncation);
    }
    c.agi_threshold = j.value("agi_threshold", c.agi_threshold);
    if (j.contains("gradient_mode"))
      c.gradient_mode = parse_gradient_mode(j.at("gradient_mode").get<std::string>());
    if (j.contains("completion")) {
      const auto& k = j.at("completion");
      detail::reject_unknown_keys(k, {"lambda_data", "lambda_smooth", "tol", "max_iter"},
                                  "completion.");
      c.completion.lambda_data = k.value("lambda_data", c.completion.lambda_data);
      c.completion.lambda_smooth = k.value("lambda_smooth", c.completion.lambda_smooth);
      c.completion.tol = k.value("tol", c.completion.tol);
      c.completion.max_iter = k.value("max_iter", c.completion.max_iter);
    }
    if (j.contains("integration")) {
      const auto& k = j.at("integration");
      detail::reject_unknown_keys(k, {"tol", "iteration_cap"}, "integration.");
      c.integration.tol = k.value("tol", c.integration.tol);
      c.integration.iteration_cap = k.value("iteration_cap", c.integration.iteration_cap);
    }
    c.bridge_gauges = j.value("bridge_gauges", c.bridge_gauges);
    c.bridge_max_gap = j.value("bridge_max_gap", c.bridge_max_gap);
    c.chromatic_shading = j.value("chromatic_shading", c.chromatic_shading);
    if (j.contains("transfer")) c.transfer = parse_transfer(j.at("transfer").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    fail_usage(std::string("invalid config: ") + e.what());
  }
  c.validate();
  return c;
}

/// Per-channel-set diagnostics (one entry in grey mode, three in chromatic).
struct StageReport {
  std::size_t valid_pixels = 0;
  int components = 0;
  std::size_t max_integration_iterations = 0;
  double max_integration_residual = 0.0;
  BridgeReport bridge;
  CgResult completion;
};

struct Decomposition {
  ScalarField agi;
  HomogeneityMask mask;
  std::vector<GradientField> gradients;
  std::vector<SparseShading> sparse;  // integrated domain (log or linear)
  ScalarField sparse_shading;         // grey, linear domain, invalid off support
  RgbImage shading;                   // per channel (channels equal unless chromatic)
  ScalarField shading_grey;
  RgbImage albedo;
  std::vector<StageReport> stages;
  double reconstruction_mse = 0.0;  // I vs alpha * S * R where S >= 1e-3
  std::vector<std::pair<std::string, double>> timings_ms;
};

namespace detail {

inline RgbImage replicate_channel(const RgbImage& img, int c) {
  RgbImage out(img.width(), img.height());
  for (std::size_t i = 0; i < img.pixel_count(); ++i)
    for (int k = 0; k < 3; ++k) out.data()[3 * i + k] = img.data()[3 * i + c];
  return out;
}

}  // namespace detail

inline Decomposition decompose(const RgbImage& img, const PipelineConfig& cfg) {
  cfg.validate();
  if (img.empty()) fail_data("input image is empty");
  Decomposition out;
  auto clock = std::chrono::steady_clock::now();
  auto lap = [&](const char* stage) {
    const auto now = std::chrono::steady_clock::now();
    out.timings_ms.emplace_back(stage,
                                std::chrono::duration<double, std::milli>(now - clock).count());
    clock = now;
  };
  out.agi = albedo_gradient_index(img, cfg.filter, cfg.epsilon);
  out.mask = homogeneity_mask(out.agi, cfg.agi_threshold);
  lap("descriptors");

  std::vector<RgbImage> sources;
  if (cfg.chromatic_shading) {
    for (int c = 0; c < 3; ++c) sources.push_back(detail::replicate_channel(img, c));
  } else {
    sources.push_back(img);
  }

  std::vector<Grid<double>> dense;
  for (const RgbImage& src : sources) {
    GradientField grad = shading_gradients(src, out.mask, cfg.filter, cfg.gradient_mode,
                                           cfg.epsilon);
    StageReport rep;
    rep.valid_pixels = count_true(grad.valid);
    if (rep.valid_pixels == 0)
      fail_data("empty homogeneous gradient support after clamping");
    lap("shading_gradients");
    SparseShading sparse = integrate_gradients(grad, cfg.integration);
    rep.components = sparse.components.count;
    for (const auto& g : sparse.gauges) {
      rep.max_integration_iterations = std::max(rep.max_integration_iterations, g.iterations);
      rep.max_integration_residual = std::max(rep.max_integration_residual, g.residual);
    }
    if (cfg.bridge_gauges) rep.bridge = bridge_gauges(sparse, grad, {cfg.bridge_max_gap});
    lap("integration");
    CompletionResult done = complete_shading_with_stats(sparse.field, cfg.completion);
    rep.completion = done.cg;
    lap("completion");

    Grid<double> s = std::move(done.shading.values);
    if (cfg.gradient_mode == GradientMode::log)
      for (double& v : s.data()) v = std::exp(v);
    dense.push_back(std::move(s));
    out.gradients.push_back(std::move(grad));
    out.sparse.push_back(std::move(sparse));
    out.stages.push_back(rep);
  }

  const int w = img.width();
  const int h = img.height();
  if (dense.size() == 1) {
    out.shading_grey = ScalarField(dense[0]);
    out.shading = from_channels(dense[0], dense[0], dense[0]);
  } else {
    out.shading = from_channels(dense[0], dense[1], dense[2]);
    Grid<double> grey(w, h);
    for (std::size_t i = 0; i < grey.size(); ++i)
      grey[i] = (dense[0][i] + dense[1][i] + dense[2][i]) / 3.0;
    out.shading_grey = ScalarField(std::move(grey));
  }
  for (double& v : out.shading.data()) v = std::max(v, 0.0);

  // Sparse export in the linear domain, averaged over channel sets.
  Grid<double> sp(w, h);
  Mask spv(w, h, 1);
  for (const SparseShading& s : out.sparse) {
    for (std::size_t i = 0; i < sp.size(); ++i) {
      if (!s.field.is_valid(i)) {
        spv[i] = 0;
        continue;
      }
      const double v = s.field.values[i];
      sp[i] += (cfg.gradient_mode == GradientMode::log ? std::exp(v) : v) /
               static_cast<double>(out.sparse.size());
    }
  }
  for (std::size_t i = 0; i < sp.size(); ++i)
    if (!spv[i]) sp[i] = 0.0;
  out.sparse_shading = ScalarField(std::move(sp), std::move(spv));

  out.albedo = RgbImage(w, h);
  for (std::size_t i = 0; i < 3 * img.pixel_count(); ++i)
    out.albedo.data()[i] = img.data()[i] / std::max(out.shading.data()[i], kShadingFloor);

  RgbImage product(w, h);
  Mask lit(w, h);
  for (std::size_t i = 0; i < img.pixel_count(); ++i) {
    bool ok = true;
    for (int c = 0; c < 3; ++c) {
      const double s = out.shading.data()[3 * i + c];
      product.data()[3 * i + c] = s * out.albedo.data()[3 * i + c];
      ok = ok && s >= 1e-3;
    }
    lit[i] = ok;
  }
  if (count_true(lit) > 0) {
    double energy = 0.0;
    for (std::size_t i = 0; i < img.pixel_count(); ++i)
      if (lit[i])
        for (int c = 0; c < 3; ++c) energy += product.data()[3 * i + c];
    out.reconstruction_mse = energy > 0.0
                                 ? mse_scaled(MetricView(product, lit), MetricView(img, lit))
                                 : 0.0;
  }
  lap("albedo");
  return out;
}

}  // namespace shadex

#pragma once

// Command implementations behind the `shadex` executable. Each returns a
// process exit code: 0 success, 1 usage, 2 data error, 3 solver failure.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "shadex/io.hpp"
#include "shadex/metrics.hpp"
#include "shadex/pipeline.hpp"
#include "shadex/synth.hpp"

namespace shadex {

namespace fs = std::filesystem;

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitSolver = 3 };

inline int exit_code_for(ErrorKind k) {
  switch (k) {
    case ErrorKind::usage:
      return kExitUsage;
    case ErrorKind::data:
      return kExitData;
    case ErrorKind::solver:
      return kExitSolver;
  }
  return kExitData;
}

/// Runs `body`, mapping exceptions to exit codes and a one-line message.
inline int guarded(const std::function<void()>& body, std::ostream& err = std::cerr) {
  try {
    body();
    return kExitOk;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.kind());
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitData;
  }
}

inline nlohmann::json read_json_file(const fs::path& path, ErrorKind kind) {
  std::ifstream in(path);
  if (!in) throw Error(kind, "cannot open '" + path.string() + "'");
  try {
    nlohmann::json j;
    in >> j;
    return j;
  } catch (const nlohmann::json::exception& e) {
    throw Error(kind, path.string() + ": " + e.what());
  }
}

inline void write_text_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) fail_data("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) fail_data("write to '" + path.string() + "' failed");
}

/// Tracks files written into an output directory and deletes them unless
/// the run is committed.
class OutputSet {
 public:
  explicit OutputSet(fs::path dir) : dir_(std::move(dir)) {
    if (!fs::exists(dir_)) {
      std::error_code ec;
      fs::create_directories(dir_, ec);
      if (ec) fail_data("cannot create output directory '" + dir_.string() + "'");
      created_dir_ = true;
    }
  }
  OutputSet(const OutputSet&) = delete;
  OutputSet& operator=(const OutputSet&) = delete;
  ~OutputSet() {
    if (committed_) return;
    std::error_code ec;
    for (const auto& f : files_) fs::remove(f, ec);
    if (created_dir_ && fs::is_empty(dir_, ec)) fs::remove(dir_, ec);
  }

  fs::path add(const std::string& name) {
    files_.push_back(dir_ / name);
    return files_.back();
  }
  const std::vector<fs::path>& files() const { return files_; }
  void commit() { committed_ = true; }

 private:
  fs::path dir_;
  std::vector<fs::path> files_;
  bool created_dir_ = false;
  bool committed_ = false;
};

// ---------------------------------------------------------------------------
// decompose
// ---------------------------------------------------------------------------

/// Individual fields set on the command line; they override the config file.
struct ConfigOverrides {
  std::optional<Transfer> transfer;
  std::optional<double> agi_threshold;
  std::optional<double> sigma;
  std::optional<double> lambda_smooth;
  bool chromatic_shading = false;

  void apply(PipelineConfig& c) const {
    if (transfer) c.transfer = *transfer;
    if (agi_threshold) c.agi_threshold = *agi_threshold;
    if (sigma) c.filter.sigma = *sigma;
    if (lambda_smooth) c.completion.lambda_smooth = *lambda_smooth;
    if (chromatic_shading) c.chromatic_shading = true;
  }
};

struct DecomposeArgs {
  fs::path input;
  std::optional<fs::path> config;
  fs::path out;
  ConfigOverrides overrides;
  std::optional<std::uint64_t> seed;  // recorded only; the pipeline is deterministic
};

inline PipelineConfig resolve_config(const std::optional<fs::path>& path,
                                     const ConfigOverrides& overrides) {
  PipelineConfig cfg;
  if (path) cfg = config_from_json(read_json_file(*path, ErrorKind::usage));
  overrides.apply(cfg);
  cfg.validate();
  return cfg;
}

inline void run_decompose(const DecomposeArgs& args) {
  const PipelineConfig cfg = resolve_config(args.config, args.overrides);
  const RgbImage img = load_image(args.input, cfg.transfer);
  const Decomposition d = decompose(img, cfg);

  OutputSet out(args.out);
  save_field(d.agi, out.add("agi.pfm"));
  save_preview_png(d.agi, out.add("agi.png"));
  save_mask_png(d.mask.keep, out.add("mask.png"));
  save_field(d.sparse_shading, out.add("sparse_shading.pfm"), 0.0);
  save_mask_png(*d.sparse_shading.valid, out.add("sparse_mask.png"));
  save_preview_png(d.sparse_shading, out.add("sparse_shading.png"));
  if (cfg.chromatic_shading) {
    save_rgb(d.shading, out.add("shading.pfm"));
    save_preview_png(d.shading, out.add("shading.png"));
  } else {
    save_field(d.shading_grey, out.add("shading.pfm"));
    save_preview_png(d.shading_grey, out.add("shading.png"));
  }
  save_rgb(d.albedo, out.add("albedo.pfm"));
  save_preview_png(d.albedo, out.add("albedo.png"));

  nlohmann::json stages = nlohmann::json::array();
  for (const StageReport& s : d.stages) {
    stages.push_back({
        {"valid_pixels", s.valid_pixels},
        {"components", s.components},
        {"integration_max_iterations", s.max_integration_iterations},
        {"integration_max_residual", s.max_integration_residual},
        {"bridge_links", s.bridge.links},
        {"bridge_groups", s.bridge.groups},
        {"completion_iterations", s.completion.iterations},
        {"completion_residual", s.completion.relative_residual},
    });
  }
  nlohmann::json timings = nlohmann::json::object();
  for (const auto& [stage, ms] : d.timings_ms) timings[stage] = timings.value(stage, 0.0) + ms;
  nlohmann::json outputs = nlohmann::json::array();
  for (const auto& f : out.files()) outputs.push_back(f.filename().string());
  outputs.push_back("manifest.json");
  nlohmann::json manifest = {
      {"input", args.input.string()},
      {"width", img.width()},
      {"height", img.height()},
      {"config", to_json(cfg)},
      {"seed", args.seed ? nlohmann::json(*args.seed) : nlohmann::json(nullptr)},
      {"homogeneous_pixels", count_true(d.mask.keep)},
      {"stages", stages},
      {"reconstruction_mse", d.reconstruction_mse},
      {"timings_ms", timings},
      {"outputs", outputs},
  };
  write_text_file(out.add("manifest.json"), manifest.dump(2) + "\n");
  out.commit();
}

inline int cmd_decompose(const DecomposeArgs& args) {
  return guarded([&] { run_decompose(args); });
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthArgs {
  fs::path scene;
  fs::path out;
  std::optional<std::uint64_t> seed;
};

inline void run_synth(const SynthArgs& args) {
  nlohmann::json doc = read_json_file(args.scene, ErrorKind::data);
  if (args.seed) apply_seed(doc, *args.seed);
  const SceneSpec spec = scene_from_json(doc, args.scene.parent_path());
  const RenderedTriple t = render(spec);

  OutputSet out(args.out);
  save_rgb(t.image, out.add("image.pfm"));
  save_preview_png(t.image, out.add("image.png"));
  if (t.chromatic)
    save_rgb(t.shading, out.add("shading.pfm"));
  else
    save_field(ScalarField(t.shading.channel(0)), out.add("shading.pfm"));
  save_rgb(t.albedo, out.add("albedo.pfm"));
  write_text_file(out.add("scene.json"), doc.dump(2) + "\n");
  out.commit();
}

inline int cmd_synth(const SynthArgs& args) {
  return guarded([&] { run_synth(args); });
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalArgs {
  fs::path pred;
  std::optional<fs::path> gt;
  std::optional<fs::path> judgments;
  fs::path report;  // JSON; a CSV is written next to it
  int window = kDefaultLmseWindow;
  double delta = kDefaultWhdrDelta;
};

namespace detail {

inline bool is_image_dir(const fs::path& dir) {
  return fs::exists(dir / "shading.pfm") || fs::exists(dir / "albedo.pfm");
}

/// Image entries of an evaluation directory: the directory itself when it
/// holds shading/albedo files, otherwise its subdirectories by name.
inline std::map<std::string, fs::path> image_entries(const fs::path& dir) {
  if (!fs::is_directory(dir)) fail_data("'" + dir.string() + "' is not a directory");
  std::map<std::string, fs::path> out;
  if (is_image_dir(dir)) {
    out[dir.filename().string()] = dir;
    return out;
  }
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_directory() && is_image_dir(e.path())) out[e.path().filename().string()] = e.path();
  return out;
}

inline FloatRaster load_for_eval(const fs::path& p) {
  try {
    return read_pfm(p);
  } catch (const Error& e) {
    fail_data(p.string() + ": " + e.what());
  }
}

inline ScalarField as_grey(const FloatRaster& r) {
  Grid<double> g(r.width, r.height);
  for (std::size_t i = 0; i < g.size(); ++i)
    g[i] = r.channels == 1 ? r.data[i]
                           : (static_cast<double>(r.data[3 * i]) + r.data[3 * i + 1] +
                              r.data[3 * i + 2]) / 3.0;
  return ScalarField(std::move(g));
}

inline RgbImage as_rgb(const FloatRaster& r) {
  RgbImage img(r.width, r.height);
  for (std::size_t i = 0; i < img.pixel_count(); ++i)
    for (int c = 0; c < 3; ++c)
      img.data()[3 * i + c] = std::max(0.0, static_cast<double>(
                                                r.data[r.channels == 3 ? 3 * i + c : i]));
  return img;
}

inline std::string csv_number(double v) {
  std::ostringstream s;
  s << std::setprecision(10) << v;
  return s.str();
}

struct MetricPair {
  double mse = 0.0;
  double lmse = 0.0;
};

template <typename T>
MetricPair metric_pair(const T& pred, const T& gt, const fs::path& file, int window) {
  if (pred.width() != gt.width() || pred.height() != gt.height())
    fail_data("shape mismatch for '" + file.string() + "': prediction " +
              std::to_string(pred.width()) + "x" + std::to_string(pred.height()) +
              ", ground truth " + std::to_string(gt.width()) + "x" +
              std::to_string(gt.height()));
  try {
    return {mse_scaled(pred, gt), lmse(pred, gt, window)};
  } catch (const Error& e) {
    throw Error(e.kind(), file.string() + ": " + e.what());
  }
}

}  // namespace detail

inline void run_eval_dense(const EvalArgs& args) {
  const auto pred = detail::image_entries(args.pred);
  const auto gt = detail::image_entries(*args.gt);
  std::vector<std::string> missing;
  for (const auto& [name, _] : pred)
    if (!gt.count(name)) missing.push_back(name + " (no ground truth)");
  for (const auto& [name, _] : gt)
    if (!pred.count(name)) missing.push_back(name + " (no prediction)");
  for (const auto& [name, dir] : pred) {
    if (!gt.count(name)) continue;
    for (const char* f : {"shading.pfm", "albedo.pfm"}) {
      const bool a = fs::exists(dir / f);
      const bool b = fs::exists(gt.at(name) / f);
      if (a != b) missing.push_back(name + "/" + f + (a ? " (no ground truth)" : " (no prediction)"));
    }
  }
  if (pred.empty()) fail_data("no images found in '" + args.pred.string() + "'");
  if (!missing.empty()) {
    std::string msg = "unmatched evaluation files:";
    for (const auto& m : missing) msg += "\n  " + m;
    fail_data(msg);
  }

  nlohmann::json images = nlohmann::json::array();
  std::string csv = "name,shading_mse,shading_lmse,albedo_mse,albedo_lmse,mse,lmse\n";
  std::map<std::string, double> sums;
  std::map<std::string, int> counts;
  for (const auto& [name, dir] : pred) {
    nlohmann::json row = {{"name", name}};
    std::vector<double> mses, lmses;
    const fs::path gdir = gt.at(name);
    if (fs::exists(dir / "shading.pfm")) {
      const auto p = detail::as_grey(detail::load_for_eval(dir / "shading.pfm"));
      const auto g = detail::as_grey(detail::load_for_eval(gdir / "shading.pfm"));
      const auto m = detail::metric_pair(p, g, dir / "shading.pfm", args.window);
      row["shading_mse"] = m.mse;
      row["shading_lmse"] = m.lmse;
      mses.push_back(m.mse);
      lmses.push_back(m.lmse);
    }
    if (fs::exists(dir / "albedo.pfm")) {
      const auto p = detail::as_rgb(detail::load_for_eval(dir / "albedo.pfm"));
      const auto g = detail::as_rgb(detail::load_for_eval(gdir / "albedo.pfm"));
      const auto m = detail::metric_pair(p, g, dir / "albedo.pfm", args.window);
      row["albedo_mse"] = m.mse;
      row["albedo_lmse"] = m.lmse;
      mses.push_back(m.mse);
      lmses.push_back(m.lmse);
    }
    double ms = 0.0, ls = 0.0;
    for (double v : mses) ms += v;
    for (double v : lmses) ls += v;
    row["mse"] = ms / mses.size();
    row["lmse"] = ls / lmses.size();
    for (const auto& [k, v] : row.items()) {
      if (k == "name") continue;
      sums[k] += v.get<double>();
      counts[k] += 1;
    }
    csv += name;
    for (const char* k : {"shading_mse", "shading_lmse", "albedo_mse", "albedo_lmse", "mse", "lmse"})
      csv += "," + (row.contains(k) ? detail::csv_number(row[k].get<double>()) : std::string());
    csv += "\n";
    images.push_back(row);
  }
  nlohmann::json aggregate = nlohmann::json::object();
  for (const auto& [k, v] : sums) aggregate[k] = v / counts[k];
  csv += "mean";
  for (const char* k : {"shading_mse", "shading_lmse", "albedo_mse", "albedo_lmse", "mse", "lmse"})
    csv += "," + (aggregate.contains(k) ? detail::csv_number(aggregate[k].get<double>()) : std::string());
  csv += "\n";

  const nlohmann::json report = {{"mode", "dense"},
                                 {"window", args.window},
                                 {"images", images},
                                 {"aggregate", aggregate}};
  write_text_file(args.report, report.dump(2) + "\n");
  fs::path csv_path = args.report;
  csv_path.replace_extension(".csv");
  write_text_file(csv_path, csv);
}

inline void run_eval_whdr(const EvalArgs& args) {
  const auto pred = detail::image_entries(args.pred);
  if (pred.empty()) fail_data("no images found in '" + args.pred.string() + "'");
  const bool per_image = fs::is_directory(*args.judgments);
  nlohmann::json images = nlohmann::json::array();
  std::string csv = "name,whdr\n";
  double sum = 0.0;
  for (const auto& [name, dir] : pred) {
    const fs::path albedo_path = dir / "albedo.pfm";
    if (!fs::exists(albedo_path)) fail_data("missing " + albedo_path.string());
    const RgbImage albedo = detail::as_rgb(detail::load_for_eval(albedo_path));
    const fs::path jpath = per_image ? *args.judgments / (name + ".json") : *args.judgments;
    if (!fs::exists(jpath)) fail_data("missing judgments for " + name + ": " + jpath.string());
    const JudgmentSet js = load_judgments(jpath, albedo.width(), albedo.height());
    const double v = whdr(albedo, js, args.delta);
    images.push_back({{"name", name}, {"whdr", v}, {"judgments", js.size()}});
    csv += name + "," + detail::csv_number(v) + "\n";
    sum += v;
  }
  const double mean = sum / static_cast<double>(pred.size());
  csv += "mean," + detail::csv_number(mean) + "\n";
  const nlohmann::json report = {{"mode", "whdr"},
                                 {"delta", args.delta},
                                 {"images", images},
                                 {"aggregate", {{"whdr", mean}}}};
  write_text_file(args.report, report.dump(2) + "\n");
  fs::path csv_path = args.report;
  csv_path.replace_extension(".csv");
  write_text_file(csv_path, csv);
}

inline int cmd_eval(const EvalArgs& args) {
  return guarded([&] {
    if (args.gt.has_value() == args.judgments.has_value())
      fail_usage("eval needs exactly one of --gt or --judgments");
    if (args.gt)
      run_eval_dense(args);
    else
      run_eval_whdr(args);
  });
}

}  // namespace shadex

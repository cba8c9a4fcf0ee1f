#include <gtest/gtest.h>

#include <cstdlib>
#include <fstream>
#include <iterator>
#include <sstream>

#include "shadex/commands.hpp"

namespace shadex {
namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("shadex_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SHADEX_CLI) + " " + args + " > /dev/null 2>&1";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

/// Sphere on a black background; returns the scene and its silhouette.
std::pair<RenderedTriple, Mask> sphere_scene(const RgbImage& albedo, double radius, Vec3 light) {
  const SphereGeometry g = sphere_normals(albedo.width(), albedo.height(), radius);
  SceneSpec s;
  s.albedo = albedo;
  for (std::size_t i = 0; i < g.inside.size(); ++i)
    if (!g.inside[i]) s.albedo.set_pixel(static_cast<int>(i % albedo.width()),
                                         static_cast<int>(i / albedo.width()), {0.0, 0.0, 0.0});
  s.normals = g.normals;
  const double n = norm3(light);
  for (double& v : light) v /= n;
  s.light_dir = light;
  s.ambient = 0.15;
  return {render(s), g.inside};
}

TEST(PipelineConfig, JsonRoundTripIsLossless) {
  PipelineConfig c;
  c.epsilon = 3e-5;
  c.filter.kind = FilterKind::central_difference;
  c.agi_threshold = 0.0123456789;
  c.gradient_mode = GradientMode::linear;
  c.completion.lambda_smooth = 0.1 + 0.2;
  c.chromatic_shading = true;
  c.transfer = Transfer::srgb;
  c.bridge_gauges = false;
  c.bridge_max_gap = 7;
  EXPECT_EQ(config_from_json(nlohmann::json::parse(to_json(c).dump())), c);
  EXPECT_EQ(config_from_json(nlohmann::json::object()), PipelineConfig{});
}

TEST(PipelineConfig, RejectsUnknownAndInvalidFields) {
  for (const char* doc : {R"({"agi_treshold": 0.1})", R"({"filter": {"sigmaa": 1}})",
                          R"({"epsilon": -1})", R"({"filter": {"kind": "sobel"}})",
                          R"({"completion": {"lambda_data": "x"}})", "[1, 2]"}) {
    try {
      config_from_json(nlohmann::json::parse(doc));
      ADD_FAILURE() << doc;
    } catch (const Error& e) {
      EXPECT_EQ(e.kind(), ErrorKind::usage) << doc;
    }
  }
}

TEST(Decompose, UniformSphereShadingMatchesGroundTruth) {
  // Scored on the object, as with the usual black-background benchmarks;
  // the band just inside the silhouette is left to the completion step.
  const auto [t, inside] = sphere_scene(RgbImage(256, 256, Rgb{0.7, 0.5, 0.3}), 110.0,
                                        {0.3, -0.2, 1.0});
  const fs::path dir = scratch("uniform_sphere");
  save_rgb(t.image, dir / "image.pfm");
  write_text_file(dir / "config.json", R"({"filter": {"kind": "central_difference"}})");
  DecomposeArgs args;
  args.input = dir / "image.pfm";
  args.config = dir / "config.json";
  args.out = dir / "out";
  ASSERT_EQ(cmd_decompose(args), kExitOk);
  const ScalarField s = load_field(dir / "out" / "shading.pfm");
  const ScalarField gt = t.grey_shading();
  EXPECT_LE(mse_scaled(ScalarField(s.values, inside), ScalarField(gt.values, inside)), 1e-3);
  const auto manifest = nlohmann::json::parse(slurp(dir / "out" / "manifest.json"));
  EXPECT_EQ(manifest.at("config").at("filter").at("kind"), "central_difference");
  EXPECT_LE(manifest.at("reconstruction_mse").get<double>(), 1e-2);
  for (const auto& f : manifest.at("outputs")) EXPECT_TRUE(fs::exists(dir / "out" / f.get<std::string>()));
}

TEST(Decompose, AllBlackImageHasEmptySupport) {
  try {
    decompose(RgbImage(32, 32), PipelineConfig{});
    FAIL() << "expected an error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), ErrorKind::data);
    EXPECT_EQ(std::string(e.what()), "empty homogeneous gradient support after clamping");
  }
  const fs::path dir = scratch("black");
  save_rgb(RgbImage(32, 32), dir / "black.pfm");
  DecomposeArgs args;
  args.input = dir / "black.pfm";
  args.out = dir / "out";
  std::ostringstream sink;
  EXPECT_EQ(guarded([&] { run_decompose(args); }, sink), kExitData);
  EXPECT_NE(sink.str().find("empty homogeneous gradient support"), std::string::npos);
  EXPECT_FALSE(fs::exists(dir / "out"));
}

/// Length of the shortest patch run through (x, y) that is bounded by edges
/// on both sides, horizontally or vertically.
int bounded_run(const Grid<int>& patch, int x, int y) {
  const int id = patch(x, y);
  int best = patch.width() + patch.height();
  int a = x, b = x;
  while (a > 0 && patch(a - 1, y) == id) --a;
  while (b + 1 < patch.width() && patch(b + 1, y) == id) ++b;
  if (a > 0 && b + 1 < patch.width()) best = std::min(best, b - a + 1);
  a = b = y;
  while (a > 0 && patch(x, a - 1) == id) --a;
  while (b + 1 < patch.height() && patch(x, b + 1) == id) ++b;
  if (a > 0 && b + 1 < patch.height()) best = std::min(best, b - a + 1);
  return best;
}

TEST(Decompose, MaskExcludesMondrianBoundaries) {
  const int n = 96;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const MondrianLayout layout = mondrian_layout(seed, 8, n, n);
    SceneSpec s;
    s.albedo = mondrian_albedo(seed, 8, n, n);
    s.normals = sphere_normals(n, n, 46).normals;
    s.ambient = 0.2;
    const Decomposition d = decompose(render(s).image, PipelineConfig{});

    // Boundary pixels on both sides of every patch edge. Edges of slivers one
    // or two pixels wide are skipped: the two edges cancel in a smoothed
    // derivative.
    std::size_t boundary = 0, kept = 0;
    for (int y = 0; y < n; ++y)
      for (int x = 0; x < n; ++x) {
        bool edge = false, sliver = bounded_run(layout.patch, x, y) < 3;
        for (auto [dx, dy] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
          if (!layout.patch.contains(x + dx, y + dy)) continue;
          edge = edge || layout.patch(x + dx, y + dy) != layout.patch(x, y);
          sliver = sliver || bounded_run(layout.patch, x + dx, y + dy) < 3;
        }
        if (!edge || sliver) continue;
        ++boundary;
        kept += d.mask.keep(x, y) != 0;
      }
    EXPECT_GT(boundary, 0u) << seed;
    EXPECT_EQ(kept, 0u) << seed;
    EXPECT_GT(count_true(d.mask.keep), static_cast<std::size_t>(n * n / 2)) << seed;
  }
}

TEST(Decompose, ChromaticModeWritesThreeChannelShading) {
  SceneSpec s;
  s.albedo = RgbImage(48, 48, Rgb{0.6, 0.6, 0.6});
  const SphereGeometry g = sphere_normals(48, 48, 23);
  s.normals = g.normals;
  s.light_color = {1.0, 0.7, 0.4};
  s.ambient = 0.2;
  const RenderedTriple t = render(s);
  const fs::path dir = scratch("chromatic");
  save_rgb(t.image, dir / "image.pfm");
  DecomposeArgs args;
  args.input = dir / "image.pfm";
  args.out = dir / "out";
  args.overrides.chromatic_shading = true;
  ASSERT_EQ(cmd_decompose(args), kExitOk);
  EXPECT_EQ(read_pfm(dir / "out" / "shading.pfm").channels, 3);
}

TEST(Decompose, RepeatedRunsAreByteIdentical) {
  const auto [t, inside] = sphere_scene(mondrian_albedo(4, 6, 80, 80), 35.0, {-0.2, 0.3, 1.0});
  const fs::path dir = scratch("determinism");
  save_rgb(t.image, dir / "image.pfm");
  for (const char* o : {"a", "b"}) {
    DecomposeArgs args;
    args.input = dir / "image.pfm";
    args.out = dir / o;
    args.seed = 5;
    ASSERT_EQ(cmd_decompose(args), kExitOk);
  }
  for (const char* f : {"agi.pfm", "sparse_shading.pfm", "shading.pfm", "albedo.pfm"})
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;
}

TEST(OutputSet, UncommittedFilesAreRemoved) {
  const fs::path dir = scratch("outputset") / "run";
  {
    OutputSet out(dir);
    write_text_file(out.add("one.txt"), "1");
    write_text_file(out.add("two.txt"), "2");
    EXPECT_TRUE(fs::exists(dir / "two.txt"));
  }
  EXPECT_FALSE(fs::exists(dir));
  fs::create_directories(dir);
  write_text_file(dir / "keep.txt", "k");
  {
    OutputSet out(dir);
    write_text_file(out.add("one.txt"), "1");
  }
  EXPECT_TRUE(fs::exists(dir / "keep.txt"));
  EXPECT_FALSE(fs::exists(dir / "one.txt"));
}

fs::path write_scene(const fs::path& dir, const nlohmann::json& doc) {
  write_text_file(dir / "scene.json", doc.dump());
  return dir / "scene.json";
}

TEST(Synth, FlatSceneImageEqualsAlbedo) {
  const fs::path dir = scratch("synth_flat");
  SynthArgs args;
  args.scene = write_scene(dir, {{"width", 20},
                                 {"height", 16},
                                 {"albedo", {{"kind", "mondrian"}, {"seed", 3}, {"patches", 5}}},
                                 {"normals", {{"kind", "flat"}}}});
  args.out = dir / "out";
  ASSERT_EQ(cmd_synth(args), kExitOk);
  const FloatRaster img = read_pfm(dir / "out" / "image.pfm");
  const FloatRaster alb = read_pfm(dir / "out" / "albedo.pfm");
  EXPECT_EQ(img.data, alb.data);
  for (float v : read_pfm(dir / "out" / "shading.pfm").data) EXPECT_EQ(v, 1.0f);
}

TEST(Synth, SeededSphereIsDeterministicAndConsistent) {
  const fs::path dir = scratch("synth_sphere");
  const nlohmann::json doc = {{"width", 64},
                              {"height", 48},
                              {"albedo", {{"kind", "mondrian"}, {"seed", 1}, {"patches", 6}}},
                              {"normals", {{"kind", "sphere"}, {"radius", 22}}},
                              {"light_dir", {0.4, -0.3, 1.0}},
                              {"light_color", {1.0, 0.9, 0.7}},
                              {"ambient", 0.1},
                              {"shadow", {{"normal", {1.0, 1.0}}, {"offset", 70.0}, {"factor", 0.5}}}};
  SynthArgs args;
  args.scene = write_scene(dir, doc);
  args.seed = 9;
  for (const char* o : {"a", "b"}) {
    args.out = dir / o;
    ASSERT_EQ(cmd_synth(args), kExitOk);
  }
  for (const char* f : {"image.pfm", "shading.pfm", "albedo.pfm"})
    EXPECT_EQ(slurp(dir / "a" / f), slurp(dir / "b" / f)) << f;

  const RgbImage img = load_image(dir / "a" / "image.pfm");
  const RgbImage shading = load_image(dir / "a" / "shading.pfm");
  const RgbImage albedo = load_image(dir / "a" / "albedo.pfm");
  double worst = 0.0;
  for (std::size_t i = 0; i < img.data().size(); ++i)
    worst = std::max(worst, std::abs(img.data()[i] - shading.data()[i] * albedo.data()[i]));
  EXPECT_LE(worst, 1e-6);
  const auto echoed = nlohmann::json::parse(slurp(dir / "a" / "scene.json"));
  EXPECT_EQ(echoed["albedo"]["seed"], 9);
}

TEST(Synth, InvalidSpecIsDataError) {
  const fs::path dir = scratch("synth_bad");
  SynthArgs args;
  args.scene = write_scene(dir, {{"width", 8},
                                 {"height", 8},
                                 {"albedo", {{"kind", "uniform"}, {"rgb", {0.5, 2.0, 0.5}}}},
                                 {"normals", {{"kind", "flat"}}}});
  args.out = dir / "out";
  std::ostringstream sink;
  EXPECT_EQ(guarded([&] { run_synth(args); }, sink), kExitData);
  EXPECT_FALSE(fs::exists(dir / "out"));
}

void write_pair(const fs::path& dir, const Grid<double>& shading, const RgbImage& albedo) {
  fs::create_directories(dir);
  save_field(ScalarField(shading), dir / "shading.pfm");
  save_rgb(albedo, dir / "albedo.pfm");
}

Grid<double> ramp(int w, int h, double a, double b) {
  Grid<double> g(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) g(x, y) = 0.25 + a * x / w + b * y / h;
  return g;
}

RgbImage tint(int w, int h, double k) {
  RgbImage img(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      img.set_pixel(x, y, {0.2 + 0.5 * ((x / 5 + y / 7) % 2), 0.3 + k * x / w, 0.6});
  return img;
}

TEST(Eval, IdenticalCopiesScoreZero) {
  const fs::path dir = scratch("eval_same");
  write_pair(dir / "pred" / "a", ramp(40, 40, 0.5, 0.2), tint(40, 40, 0.3));
  write_pair(dir / "gt" / "a", ramp(40, 40, 0.5, 0.2), tint(40, 40, 0.3));
  EvalArgs args;
  args.pred = dir / "pred";
  args.gt = dir / "gt";
  args.report = dir / "report.json";
  ASSERT_EQ(cmd_eval(args), kExitOk);
  const auto r = nlohmann::json::parse(slurp(dir / "report.json"));
  for (const auto& [k, v] : r["aggregate"].items()) EXPECT_EQ(v.get<double>(), 0.0) << k;
  EXPECT_TRUE(fs::exists(dir / "report.csv"));
}

TEST(Eval, ShapeMismatchNamesTheFile) {
  const fs::path dir = scratch("eval_shape");
  write_pair(dir / "pred" / "a", ramp(40, 40, 0.5, 0.2), tint(40, 40, 0.3));
  write_pair(dir / "gt" / "a", ramp(40, 30, 0.5, 0.2), tint(40, 40, 0.3));
  EvalArgs args;
  args.pred = dir / "pred";
  args.gt = dir / "gt";
  args.report = dir / "report.json";
  std::ostringstream sink;
  EXPECT_EQ(guarded([&] { run_eval_dense(args); }, sink), kExitData);
  EXPECT_NE(sink.str().find("shading.pfm"), std::string::npos) << sink.str();
}

TEST(Eval, MissingPairsAreListed) {
  const fs::path dir = scratch("eval_missing");
  write_pair(dir / "pred" / "a", ramp(40, 40, 0.5, 0.2), tint(40, 40, 0.3));
  write_pair(dir / "pred" / "b", ramp(40, 40, 0.5, 0.2), tint(40, 40, 0.3));
  write_pair(dir / "gt" / "a", ramp(40, 40, 0.5, 0.2), tint(40, 40, 0.3));
  write_pair(dir / "gt" / "c", ramp(40, 40, 0.5, 0.2), tint(40, 40, 0.3));
  EvalArgs args;
  args.pred = dir / "pred";
  args.gt = dir / "gt";
  args.report = dir / "report.json";
  std::ostringstream sink;
  EXPECT_EQ(guarded([&] { run_eval_dense(args); }, sink), kExitData);
  EXPECT_NE(sink.str().find("b (no ground truth)"), std::string::npos);
  EXPECT_NE(sink.str().find("c (no prediction)"), std::string::npos);
}

TEST(Eval, AggregateIsMeanOfPerImageValues) {
  const fs::path dir = scratch("eval_mean");
  // Values chosen to be exact in float32 so the oracle sees the same data.
  std::vector<std::tuple<std::string, Grid<double>, Grid<double>, RgbImage, RgbImage>> set;
  set.emplace_back("one", ramp(40, 40, 0.5, 0.25), ramp(40, 40, 0.25, 0.5), tint(40, 40, 0.25),
                   tint(40, 40, 0.5));
  set.emplace_back("two", ramp(40, 40, 0.125, 0.0), ramp(40, 40, 0.0, 0.75), tint(40, 40, 0.75),
                   tint(40, 40, 0.0));
  double mse = 0.0, lm = 0.0;
  for (auto& [name, ps, gs, pa, ga] : set) {
    write_pair(dir / "pred" / name, ps, pa);
    write_pair(dir / "gt" / name, gs, ga);
    auto f32 = [](Grid<double> g) {
      for (double& v : g.data()) v = static_cast<float>(v);
      return ScalarField(std::move(g));
    };
    auto f32rgb = [](RgbImage img) {
      for (double& v : img.data()) v = static_cast<float>(v);
      return img;
    };
    const double sm = mse_scaled(f32(ps), f32(gs)), sl = lmse(f32(ps), f32(gs));
    const double am = mse_scaled(f32rgb(pa), f32rgb(ga)), al = lmse(f32rgb(pa), f32rgb(ga));
    mse += (sm + am) / 2.0 / set.size();
    lm += (sl + al) / 2.0 / set.size();
  }
  EvalArgs args;
  args.pred = dir / "pred";
  args.gt = dir / "gt";
  args.report = dir / "report.json";
  ASSERT_EQ(cmd_eval(args), kExitOk);
  const auto r = nlohmann::json::parse(slurp(dir / "report.json"));
  ASSERT_EQ(r["images"].size(), 2u);
  EXPECT_NEAR(r["aggregate"]["mse"].get<double>(), mse, 1e-12);
  EXPECT_NEAR(r["aggregate"]["lmse"].get<double>(), lm, 1e-12);
  EXPECT_GT(mse, 0.0);
}

TEST(Eval, WhdrFromJudgmentFile) {
  const fs::path dir = scratch("eval_whdr");
  RgbImage albedo(4, 1);
  const double lum[4] = {0.2, 0.5, 0.51, 0.9};
  for (int x = 0; x < 4; ++x) albedo.set_pixel(x, 0, {lum[x], lum[x], lum[x]});
  fs::create_directories(dir / "pred" / "img");
  save_rgb(albedo, dir / "pred" / "img" / "albedo.pfm");
  write_text_file(dir / "j.json", R"([
    {"p1": [0.0, 0.0], "p2": [0.25, 0.0], "darker": "1", "weight": 1},
    {"p1": [0.0, 0.0], "p2": [0.75, 0.0], "darker": "2", "weight": 3}
  ])");
  EvalArgs args;
  args.pred = dir / "pred";
  args.judgments = dir / "j.json";
  args.report = dir / "whdr.json";
  ASSERT_EQ(cmd_eval(args), kExitOk);
  const auto r = nlohmann::json::parse(slurp(dir / "whdr.json"));
  EXPECT_DOUBLE_EQ(r["aggregate"]["whdr"].get<double>(), 0.75);
}

TEST(Cli, ExitCodes) {
  const fs::path dir = scratch("cli");
  save_rgb(RgbImage(16, 16), dir / "black.pfm");
  EXPECT_EQ(run_cli("decompose " + (dir / "black.pfm").string() + " --out " + (dir / "o").string()), 2);
  EXPECT_EQ(run_cli("decompose " + (dir / "missing.pfm").string() + " --out " + (dir / "o").string()), 2);
  EXPECT_EQ(run_cli("decompose " + (dir / "black.pfm").string()), 1);
  EXPECT_EQ(run_cli("frobnicate"), 1);
  EXPECT_EQ(run_cli("eval --pred " + dir.string() + " --out " + (dir / "r.json").string()), 1);
  write_text_file(dir / "bad.json", R"({"agi_threshold": -1})");
  EXPECT_EQ(run_cli("decompose " + (dir / "black.pfm").string() + " --config " +
                    (dir / "bad.json").string() + " --out " + (dir / "o").string()),
            1);
  EXPECT_EQ(run_cli("--help"), 0);
}

TEST(Cli, EndToEndSynthDecomposeEval) {
  const fs::path dir = scratch("cli_e2e");
  write_text_file(dir / "scene.json", nlohmann::json{{"width", 64},
                                                     {"height", 64},
                                                     {"albedo", {{"kind", "uniform"}, {"rgb", {0.6, 0.5, 0.4}}}},
                                                     {"normals", {{"kind", "flat"}}},
                                                     {"shadow", {{"normal", {1.0, 0.0}}, {"offset", 31.5}, {"factor", 0.5}}}}
                                          .dump());
  ASSERT_EQ(run_cli("synth " + (dir / "scene.json").string() + " --out " + (dir / "gt" / "s").string()), 0);
  ASSERT_EQ(run_cli("decompose " + (dir / "gt" / "s" / "image.pfm").string() + " --out " +
                    (dir / "pred" / "s").string()),
            0);
  ASSERT_EQ(run_cli("eval --pred " + (dir / "pred").string() + " --gt " + (dir / "gt").string() +
                    " --out " + (dir / "report.json").string()),
            0);
  const auto r = nlohmann::json::parse(slurp(dir / "report.json"));
  EXPECT_LE(r["aggregate"]["shading_mse"].get<double>(), 5e-3);
}

}  // namespace
}  // namespace shadex

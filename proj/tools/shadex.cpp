// shadex: learning-free shading/albedo decomposition from photometric invariants.

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

#include "shadex/commands.hpp"

int main(int argc, char** argv) {
  using namespace shadex;
  CLI::App app{"Physics-based intrinsic image decomposition"};
  app.require_subcommand(1);

  DecomposeArgs dec;
  std::string dec_transfer;
  double dec_agi = 0.0, dec_sigma = 0.0, dec_lambda = 0.0;
  std::uint64_t dec_seed = 0;
  auto* decompose = app.add_subcommand("decompose", "Decompose an image into shading and albedo");
  decompose->add_option("input", dec.input, "Input image (PNG or PFM)")->required();
  decompose->add_option("--config", dec.config, "Pipeline config JSON");
  decompose->add_option("--out", dec.out, "Output directory")->required();
  auto* o_transfer = decompose->add_option("--transfer", dec_transfer, "Input transfer: srgb or linear")
                         ->check(CLI::IsMember({"srgb", "linear"}));
  auto* o_agi = decompose->add_option("--agi-threshold", dec_agi, "Homogeneity threshold on AGI");
  auto* o_sigma = decompose->add_option("--sigma", dec_sigma, "Gaussian derivative sigma (pixels)");
  auto* o_lambda = decompose->add_option("--lambda-smooth", dec_lambda, "Completion smoothness weight");
  decompose->add_flag("--chromatic-shading", dec.overrides.chromatic_shading,
                      "Reconstruct shading per colour channel");
  auto* o_dseed = decompose->add_option("--seed", dec_seed, "Seed recorded in the manifest");

  SynthArgs syn;
  std::uint64_t syn_seed = 0;
  auto* synth = app.add_subcommand("synth", "Render a synthetic scene with exact intrinsics");
  synth->add_option("scene", syn.scene, "Scene JSON")->required()->check(CLI::ExistingFile);
  synth->add_option("--out", syn.out, "Output directory")->required();
  auto* o_sseed = synth->add_option("--seed", syn_seed, "Override the mondrian albedo seed");

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Score predictions against ground truth");
  eval->add_option("--pred", ev.pred, "Prediction directory")->required();
  auto* o_gt = eval->add_option("--gt", ev.gt, "Ground-truth directory");
  auto* o_j = eval->add_option("--judgments", ev.judgments, "Judgment JSON file or directory");
  o_gt->excludes(o_j);
  eval->add_option("--out", ev.report, "Report path (JSON; CSV written alongside)")->required();
  eval->add_option("--window", ev.window, "LMSE window")->capture_default_str();
  eval->add_option("--delta", ev.delta, "WHDR equality margin")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitUsage;
  }

  if (*decompose) {
    return guarded([&] {
      if (*o_transfer) dec.overrides.transfer = parse_transfer(dec_transfer);
      if (*o_agi) dec.overrides.agi_threshold = dec_agi;
      if (*o_sigma) dec.overrides.sigma = dec_sigma;
      if (*o_lambda) dec.overrides.lambda_smooth = dec_lambda;
      if (*o_dseed) dec.seed = dec_seed;
      run_decompose(dec);
    });
  }
  if (*synth) {
    if (*o_sseed) syn.seed = syn_seed;
    return cmd_synth(syn);
  }
  return cmd_eval(ev);
}

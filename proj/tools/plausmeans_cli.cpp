#include <iostream>

#include <CLI11.hpp>

#include "plausmeans/cli.hpp"

int main(int argc, char** argv) {
  using plausmeans::RunConfig;
  RunConfig cfg;

  CLI::App app{"Inferential models for many normal means"};
  app.require_subcommand(1);

  auto add_common = [&cfg](CLI::App* sub) {
    sub->add_option("-i,--input", cfg.input, "Data file: one value per line, or a 'y,s' CSV");
    sub->add_option("-o,--output", cfg.output, "Output file (default stdout)");
    sub->add_option("--kind", cfg.kind, "eb or classic")->check(CLI::IsMember({"eb", "classic"}));
    sub->add_option("--K", cfg.K, "Grid size");
    sub->add_option("--nu", cfg.nu, "Boundary weight exponent");
    sub->add_option("--c-n", cfg.c_n, "Boundary offset");
    sub->add_option("--alpha", cfg.alpha, "Conditional miss rate");
    sub->add_option("--pi", cfg.pi, "Plausibility miss rate");
    sub->add_option("--mc-samples", cfg.mc_samples, "Monte Carlo draws for B quantiles");
    sub->add_option("--m", cfg.m, "Adaptive ladder size");
    sub->add_option("--reps", cfg.reps, "Adaptive simulation replicates");
    sub->add_option("--target", cfg.target, "Adaptive target coverage");
    sub->add_option("--seed", cfg.seed, "Master seed");
    sub->add_option("--format", cfg.format, "json or csv")->check(CLI::IsMember({"json", "csv"}));
    sub->add_option("--plot-output", cfg.plot_output, "Per-index figure CSV");
    sub->add_option("--ladder-output", cfg.ladder_output, "Adaptive ladder CSV");
    sub->add_option("--starts", cfg.optimizer.starts, "Optimizer multi-start count");
  };

  const std::vector<std::pair<std::string, std::string>> commands{
      {"estimate", "Maximum plausibility point estimates"},
      {"intervals", "Plausibility intervals"},
      {"adaptive", "Adaptively calibrated intervals"},
      {"simulate", "Replication studies"},
      {"real-data", "SAT coaching analysis (bundled data unless --input)"}};
  for (const auto& [name, help] : commands) {
    auto* sub = app.add_subcommand(name, help);
    add_common(sub);
    if (name == "simulate") {
      sub->add_option("--scenario", cfg.scenario, "single_mode, two_mode or outlier");
      sub->add_option("--n", cfg.n, "Number of means");
      sub->add_option("--study", cfg.study, "mse or coverage");
      sub->add_option("--M", cfg.M, "Replicates");
      sub->add_option("--methods", cfg.methods, "Methods for the mse study")->delimiter(',');
      sub->add_option("--levels", cfg.levels, "Nominal coverage rows")->delimiter(',');
      sub->add_flag("--paper-scale", cfg.paper_scale, "K=1000, M=200");
    }
    sub->callback([&cfg, name = name] { cfg.command = name; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : plausmeans::kExitInput;
  }
  return plausmeans::run_command(cfg, std::cerr);
}

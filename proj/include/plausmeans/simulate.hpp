#pragma once

// Scenario generators and the replication engine for MSE and interval
// coverage studies.

#include <string>
#include <string_view>
#include <vector>

#include "plausmeans/core.hpp"
#include "plausmeans/nlp_opt.hpp"
#include "plausmeans/prs.hpp"

namespace plausmeans {

enum class ScenarioKind { single_mode, two_mode, outlier };

struct Scenario {
  ScenarioKind kind = ScenarioKind::single_mode;
  Index n = 10;
  // single_mode: N(0, sd^2); two_mode: 1/2 N(-mode, sd^2) + 1/2 N(mode, sd^2);
  // outlier: (1 - outlier_prob) delta_0 + outlier_prob N(outlier_mean, outlier_sd^2).
  double sd = 0.1;
  double mode = 2.0;
  double outlier_prob = 0.1;
  double outlier_mean = -3.0;
  double outlier_sd = 1.0;

  static Scenario named(std::string_view name, Index n);
  std::string name() const;
};

struct Replicate {
  Vector theta;
  Vector x;
};

Replicate generate_replicate(const Scenario& scenario, RandomStream& rng);

enum class Method { mle, james_stein, james_stein_positive_part, efron_morris, eb_im, classic_im };

Method parse_method(std::string_view name);
std::string method_name(Method m);

struct MethodSummary {
  std::string method;
  double mse = 0.0;
  double se = 0.0;
  int used = 0;
  int excluded = 0;
  std::vector<double> per_replicate;  // NaN where excluded
};

// Targeted coverage rows: MPE (maximum plausibility region) or a nominal level.
struct CoverageLevel {
  std::string label;
  double nominal = 0.0;  // 0 for the MPE row

  static CoverageLevel mpe() { return {"MPE", 0.0}; }
  static CoverageLevel nominal_level(double level);
  static std::vector<CoverageLevel> table_rows();  // MPE, 50%, 75%, 90%, 95%
};

struct LevelSummary {
  std::string label;
  double nominal = 0.0;
  double plausibility = 0.0;  // 1 - pi used for the row (0 for MPE)
  double coverage = 0.0;      // percent
  double coverage_se = 0.0;   // percent
  double mean_length = 0.0;
  int used = 0;
  std::vector<double> per_replicate;  // coverage fraction per replicate, NaN where excluded
};

struct ReplicationReport {
  std::string study;  // "mse" or "coverage"
  Scenario scenario;
  int M = 0;
  Index K = 0;
  std::uint64_t seed = 0;
  double alpha = 0.0;
  std::vector<MethodSummary> methods;
  std::vector<LevelSummary> levels;
  int excluded = 0;
  bool exclusion_flag = false;  // exclusions above 2% of replicate-method pairs
  double runtime_seconds = 0.0;
  unsigned threads = 1;

  const MethodSummary& method(std::string_view name) const;
  const LevelSummary& level(std::string_view label) const;
};

ReplicationReport run_mse_study(const Scenario& scenario, const std::vector<Method>& methods, int M,
                                Index K, std::uint64_t seed, const OptimizerConfig& config,
                                double c_n = kDefaultOffset, double nu = kDefaultNu);

// Intervals use 1 - alpha = sqrt(0.95) and, for a nominal row, 1 - pi =
// nominal / sqrt(0.95).
ReplicationReport run_coverage_study(const Scenario& scenario, const std::vector<CoverageLevel>& levels,
                                     int M, Index K, std::uint64_t seed,
                                     const OptimizerConfig& config,
                                     int mc_samples = kDefaultQuantileSamples,
                                     double c_n = kDefaultOffset, double nu = kDefaultNu);

}  // namespace plausmeans

#include "plausmeans/simulate.hpp"

#include <chrono>
#include <cmath>

#include "plausmeans/baselines.hpp"
#include "plausmeans/classic_im.hpp"
#include "plausmeans/eb_deconv.hpp"
#include "plausmeans/parallel.hpp"

namespace plausmeans {

namespace {

constexpr std::uint64_t kQuantileStream = 0xffffffffffffULL;
const double kNaN = std::numeric_limits<double>::quiet_NaN();

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
  int used = 0;
};

// Mean and standard error over the finite entries, summed pairwise.
MeanSe summarize(const std::vector<double>& values) {
  std::vector<double> kept;
  for (double v : values)
    if (std::isfinite(v)) kept.push_back(v);
  MeanSe s;
  s.used = static_cast<int>(kept.size());
  if (kept.empty()) return s;
  s.mean = pairwise_sum(kept.data(), kept.size()) / s.used;
  if (s.used > 1) {
    std::vector<double> sq(kept.size());
    for (std::size_t i = 0; i < kept.size(); ++i) sq[i] = (kept[i] - s.mean) * (kept[i] - s.mean);
    s.se = std::sqrt(pairwise_sum(sq.data(), sq.size()) / (s.used - 1) / s.used);
  }
  return s;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

Scenario Scenario::named(std::string_view name, Index n) {
  Scenario s;
  s.n = n;
  if (name == "single_mode") s.kind = ScenarioKind::single_mode;
  else if (name == "two_mode") s.kind = ScenarioKind::two_mode;
  else if (name == "outlier") s.kind = ScenarioKind::outlier;
  else throw InvalidParameter("unknown scenario '" + std::string(name) + "'");
  if (n < 1) throw InvalidParameter("scenario: n must be positive");
  return s;
}

std::string Scenario::name() const {
  switch (kind) {
    case ScenarioKind::single_mode: return "single_mode";
    case ScenarioKind::two_mode: return "two_mode";
    case ScenarioKind::outlier: return "outlier";
  }
  return "unknown";
}

Replicate generate_replicate(const Scenario& scenario, RandomStream& rng) {
  Replicate r{Vector(scenario.n), Vector(scenario.n)};
  for (Index i = 0; i < scenario.n; ++i) {
    double theta = 0.0;
    switch (scenario.kind) {
      case ScenarioKind::single_mode:
        theta = rng.normal(0.0, scenario.sd);
        break;
      case ScenarioKind::two_mode: {
        const double centre = rng.uniform() < 0.5 ? -scenario.mode : scenario.mode;
        theta = rng.normal(centre, scenario.sd);
        break;
      }
      case ScenarioKind::outlier:
        theta = rng.uniform() < scenario.outlier_prob
                    ? rng.normal(scenario.outlier_mean, scenario.outlier_sd)
                    : 0.0;
        break;
    }
    r.theta[i] = theta;
    r.x[i] = theta + rng.normal();
  }
  return r;
}

Method parse_method(std::string_view name) {
  if (name == "mle") return Method::mle;
  if (name == "james_stein" || name == "js") return Method::james_stein;
  if (name == "james_stein_positive_part" || name == "js_plus") return Method::james_stein_positive_part;
  if (name == "efron_morris") return Method::efron_morris;
  if (name == "eb_im") return Method::eb_im;
  if (name == "classic_im") return Method::classic_im;
  throw InvalidParameter("unknown method '" + std::string(name) + "'");
}

std::string method_name(Method m) {
  switch (m) {
    case Method::mle: return "mle";
    case Method::james_stein: return "james_stein";
    case Method::james_stein_positive_part: return "james_stein_positive_part";
    case Method::efron_morris: return "efron_morris";
    case Method::eb_im: return "eb_im";
    case Method::classic_im: return "classic_im";
  }
  return "unknown";
}

CoverageLevel CoverageLevel::nominal_level(double level) {
  if (!(level > 0.0 && level <= 0.95 + 1e-12))
    throw InvalidParameter("coverage level must lie in (0, 0.95]");
  return {std::to_string(static_cast<int>(std::lround(level * 100))) + "%", level};
}

std::vector<CoverageLevel> CoverageLevel::table_rows() {
  return {mpe(), nominal_level(0.50), nominal_level(0.75), nominal_level(0.90), nominal_level(0.95)};
}

const MethodSummary& ReplicationReport::method(std::string_view name) const {
  for (const auto& m : methods)
    if (m.method == name) return m;
  throw InvalidParameter("report has no method '" + std::string(name) + "'");
}

const LevelSummary& ReplicationReport::level(std::string_view label) const {
  for (const auto& l : levels)
    if (l.label == label) return l;
  throw InvalidParameter("report has no level '" + std::string(label) + "'");
}

ReplicationReport run_mse_study(const Scenario& scenario, const std::vector<Method>& methods, int M,
                                Index K, std::uint64_t seed, const OptimizerConfig& config,
                                double c_n, double nu) {
  if (M < 2) throw InvalidParameter("mse study: M must be at least 2");
  if (methods.empty()) throw InvalidParameter("mse study: no methods");
  const auto t0 = std::chrono::steady_clock::now();
  const BoundarySpec spec(scenario.n, c_n, nu);

  ReplicationReport report;
  report.study = "mse";
  report.scenario = scenario;
  report.M = M;
  report.K = K;
  report.seed = seed;
  report.threads = worker_count();

  std::vector<std::vector<double>> mse(methods.size(), std::vector<double>(static_cast<std::size_t>(M), kNaN));
  parallel_for(static_cast<std::size_t>(M), [&](std::size_t r) {
    RandomStream rng = RandomStream::substream(seed, r);
    const Replicate rep = generate_replicate(scenario, rng);
    for (std::size_t m = 0; m < methods.size(); ++m) {
      try {
        Vector est;
        switch (methods[m]) {
          case Method::mle: est = mle(rep.x).values; break;
          case Method::james_stein: est = james_stein(rep.x).values; break;
          case Method::james_stein_positive_part: est = james_stein_positive_part(rep.x).values; break;
          case Method::efron_morris: est = efron_morris(rep.x).values; break;
          case Method::eb_im: {
            SortedSample sample = SortedSample::from(rep.x);
            Grid grid = make_grid(sample, K);
            const DeconvolutionModel model(std::move(grid), std::move(sample), spec);
            est = mpe_estimate(model, config).mid;
            break;
          }
          case Method::classic_im: est = classic_point_estimate(rep.x, spec, config); break;
        }
        mse[m][r] = (est - rep.theta).squaredNorm() / static_cast<double>(scenario.n);
      } catch (const NumericalError&) {
        // excluded
      }
    }
  });

  int pairs = 0;
  for (std::size_t m = 0; m < methods.size(); ++m) {
    const MeanSe s = summarize(mse[m]);
    MethodSummary ms{method_name(methods[m]), s.mean, s.se, s.used, M - s.used, mse[m]};
    report.excluded += ms.excluded;
    pairs += M;
    report.methods.push_back(std::move(ms));
  }
  report.exclusion_flag = report.excluded > 0.02 * pairs;
  report.runtime_seconds = seconds_since(t0);
  return report;
}

ReplicationReport run_coverage_study(const Scenario& scenario, const std::vector<CoverageLevel>& levels,
                                     int M, Index K, std::uint64_t seed,
                                     const OptimizerConfig& config, int mc_samples, double c_n,
                                     double nu) {
  if (M < 2) throw InvalidParameter("coverage study: M must be at least 2");
  if (levels.empty()) throw InvalidParameter("coverage study: no levels");
  const auto t0 = std::chrono::steady_clock::now();
  const BoundarySpec spec(scenario.n, c_n, nu);
  const double conditional = std::sqrt(0.95);

  ReplicationReport report;
  report.study = "coverage";
  report.scenario = scenario;
  report.M = M;
  report.K = K;
  report.seed = seed;
  report.alpha = 1.0 - conditional;
  report.threads = worker_count();

  // Quantile thresholds do not depend on the data.
  RandomStream qrng = RandomStream::substream(seed, kQuantileStream);
  auto draws = boundary_distribution(spec, mc_samples, qrng);
  std::vector<double> quantiles(levels.size(), 0.0);
  std::vector<double> plaus(levels.size(), 0.0);
  for (std::size_t l = 0; l < levels.size(); ++l) {
    if (levels[l].nominal <= 0.0) continue;
    plaus[l] = levels[l].nominal / conditional;
    if (!(plaus[l] > 0.0 && plaus[l] < 1.0))
      throw InvalidParameter("coverage study: nominal level too high for 1 - alpha = sqrt(0.95)");
    quantiles[l] = empirical_quantile(draws, plaus[l]);
  }

  std::vector<std::vector<double>> cover(levels.size(), std::vector<double>(static_cast<std::size_t>(M), kNaN));
  auto length = cover;
  parallel_for(static_cast<std::size_t>(M), [&](std::size_t r) {
    RandomStream rng = RandomStream::substream(seed, r);
    const Replicate rep = generate_replicate(scenario, rng);
    try {
      SortedSample sample = SortedSample::from(rep.x);
      Grid grid = make_grid(sample, K);
      const DeconvolutionModel model(std::move(grid), std::move(sample), spec);
      const MpeFit fit = mpe_fit(model, config);
      std::vector<double> thresholds(levels.size());
      for (std::size_t l = 0; l < levels.size(); ++l)
        thresholds[l] = levels[l].nominal > 0.0 ? quantiles[l] : fit.b_min + kGammaMinSlack;
      const auto sets = interval_ladder(model, fit, thresholds, report.alpha, config);
      for (std::size_t l = 0; l < levels.size(); ++l) {
        int covered = 0;
        for (Index i = 0; i < scenario.n; ++i)
          covered += (sets[l].lower[i] <= rep.theta[i] && rep.theta[i] <= sets[l].upper[i]) ? 1 : 0;
        cover[l][r] = static_cast<double>(covered) / static_cast<double>(scenario.n);
        length[l][r] = (sets[l].upper - sets[l].lower).mean();
      }
    } catch (const NumericalError&) {
      // excluded
    }
  });

  for (std::size_t l = 0; l < levels.size(); ++l) {
    const MeanSe c = summarize(cover[l]);
    const MeanSe len = summarize(length[l]);
    LevelSummary ls;
    ls.label = levels[l].label;
    ls.nominal = levels[l].nominal;
    ls.plausibility = plaus[l];
    ls.coverage = 100.0 * c.mean;
    ls.coverage_se = 100.0 * c.se;
    ls.mean_length = len.mean;
    ls.used = c.used;
    ls.per_replicate = cover[l];
    report.levels.push_back(std::move(ls));
  }
  report.excluded = M - (report.levels.empty() ? M : report.levels.front().used);
  report.exclusion_flag = report.excluded > 0.02 * M;
  report.runtime_seconds = seconds_since(t0);
  return report;
}

}  // namespace plausmeans

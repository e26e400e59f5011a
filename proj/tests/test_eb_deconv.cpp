#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "plausmeans/eb_deconv.hpp"
#include "test_util.hpp"

using namespace plausmeans;

namespace {

Vector vec(std::initializer_list<double> v) {
  Vector out(static_cast<Index>(v.size()));
  Index i = 0;
  for (double d : v) out[i++] = d;
  return out;
}

DeconvolutionModel model_for(const Vector& x, Index K) {
  const SortedSample s = SortedSample::from(x);
  return DeconvolutionModel(make_grid(s, K), s, BoundarySpec(x.size()));
}

OptimizerConfig fast_config() {
  OptimizerConfig c;
  c.starts = 3;
  return c;
}

}  // namespace

TEST_SUITE("eb_deconv") {
  TEST_CASE("grid spans the data with normal tail margins") {
    const SortedSample s = SortedSample::from(vec({1.0, -2.0, 0.5}));
    const Grid g = make_grid(s, 11);
    CHECK(g.size() == 11);
    CHECK(g[0] == doctest::Approx(-2.0 - 3.719016485455709).epsilon(1e-12));
    CHECK(g[10] == doctest::Approx(1.0 + 3.719016485455709).epsilon(1e-12));
    CHECK(g.spacing().has_value());
    CHECK(g.nearest(g[4] + 0.4 * *g.spacing()) == 4);
    CHECK_THROWS_AS(Grid(vec({0.0, 0.0})), InvalidParameter);
  }

  TEST_CASE("sorted sample keeps ties in input order") {
    const SortedSample s = SortedSample::from(vec({2.0, 1.0, 2.0, 0.0}));
    CHECK(s.x_sorted == vec({0.0, 1.0, 2.0, 2.0}));
    CHECK(s.rank_of_input == std::vector<Index>{2, 1, 3, 0});
    CHECK(s.input_order() == vec({2.0, 1.0, 2.0, 0.0}));
  }

  TEST_CASE("mixture cdf and posterior follow their definitions") {
    const Grid g(vec({-1.0, 0.0, 2.0}));
    const Vector gamma = vec({0.2, 0.5, 0.3});
    const double x = 0.7;
    double cdf = 0.0, norm = 0.0, mean = 0.0;
    Vector post(3);
    for (Index k = 0; k < 3; ++k) {
      cdf += gamma[k] * normal_cdf(x - g[k]);
      post[k] = gamma[k] * normal_pdf(x - g[k]);
      norm += post[k];
    }
    post /= norm;
    for (Index k = 0; k < 3; ++k) mean += post[k] * g[k];
    CHECK(mixture_cdf(g, gamma, x) == doctest::Approx(cdf).epsilon(1e-14));
    CHECK((posterior_pmf(g, gamma, x) - post).lpNorm<Eigen::Infinity>() <= 1e-14);
    CHECK(posterior_mean(g, gamma, x) == doctest::Approx(mean).epsilon(1e-14));
    CHECK_THROWS(check_simplex_weights(g, vec({0.5, 0.6, -0.1})));
  }

  TEST_CASE("association gradient matches central differences") {
    RandomStream rng(21);
    for (int t = 0; t < 100; ++t) {
      const Index n = 2 + static_cast<Index>(rng.below(8));
      Vector x(n);
      for (Index i = 0; i < n; ++i) x[i] = 2.0 * rng.normal();
      const DeconvolutionModel m = model_for(x, 8 + static_cast<Index>(rng.below(20)));
      const Vector gamma = testutil::dirichlet(m.K(), rng);
      Vector grad;
      m.association(gamma, &grad);
      const Vector fd = testutil::central_difference(
          [&](const Vector& v) { return m.association(v); }, gamma, 1e-6);
      CHECK(testutil::relative_error(grad, fd) <= 1e-5);
      const Vector free_grad = association_gradient(m.grid(), gamma, m.sample(), m.spec());
      CHECK(testutil::relative_error(free_grad, grad) <= 1e-12);
      CHECK(association_value(m.grid(), gamma, m.sample(), m.spec()) ==
            doctest::Approx(m.association(gamma)).epsilon(1e-13));
    }
  }

  TEST_CASE("posterior mean and tail gradients match central differences") {
    RandomStream rng(22);
    const DeconvolutionModel m = model_for(vec({-1.0, 0.3, 2.0, 0.9}), 15);
    for (int t = 0; t < 20; ++t) {
      const Vector gamma = testutil::dirichlet(m.K(), rng);
      const Index i = static_cast<Index>(rng.below(4));
      Vector g;
      m.posterior_mean(gamma, i, &g);
      CHECK(testutil::relative_error(
                g, testutil::central_difference([&](const Vector& v) { return m.posterior_mean(v, i); },
                                                gamma, 1e-6)) <= 1e-5);
      m.posterior_tail(gamma, i, 5, true, &g);
      CHECK(testutil::relative_error(
                g, testutil::central_difference(
                       [&](const Vector& v) { return m.posterior_tail(v, i, 5, true); }, gamma, 1e-6)) <=
            1e-5);
    }
  }

  TEST_CASE("fit attains the minimum over random mixing weights") {
    RandomStream rng(23);
    const DeconvolutionModel m = model_for(vec({-1.2, 0.1, 0.4, 2.2, 1.0}), 40);
    const MpeFit fit = mpe_fit(m, fast_config());
    CHECK(fit.converged);
    CHECK(fit.b_min <= fit.b_start + 1e-12);
    check_simplex_weights(m.grid(), fit.gamma_star, 1e-8);
    CHECK(m.association(fit.gamma_star) == doctest::Approx(fit.b_min).epsilon(1e-12));
    for (int t = 0; t < 1000; ++t) CHECK(m.association(testutil::dirichlet(m.K(), rng)) >= fit.b_min - 1e-10);
    // First-order optimality: every grid point has directional slope >= the support's.
    Vector g;
    m.association(fit.gamma_star, &g);
    const double on_support = g.dot(fit.gamma_star);
    CHECK(g.minCoeff() >= on_support - 1e-6 * (1.0 + std::abs(on_support)));
  }

  TEST_CASE("posterior mean extremes enclose a rejection-sampling oracle") {
    RandomStream rng(24);
    const DeconvolutionModel m = model_for(vec({-0.8, 0.2, 1.5}), 10);
    const MpeFit fit = mpe_fit(m, fast_config());
    const PlausibilityRegion region = make_region(fit, fit.b_min + 0.3);
    for (Index i = 0; i < 3; ++i) {
      const Extremes e = mpe_theta_extremes(m, region, i, fast_config());
      CHECK(e.converged);
      double lo = 1e300, hi = -1e300;
      int accepted = 0;
      for (int t = 0; t < 100000; ++t) {
        const double shape = std::pow(0.3, static_cast<double>(t % 4));
        const Vector gamma = testutil::dirichlet(m.K(), shape, rng);
        if (m.association(gamma) > region.threshold) continue;
        ++accepted;
        const double v = m.posterior_mean(gamma, i);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
      REQUIRE(accepted > 100);
      CHECK(e.lower <= lo + 1e-9);
      CHECK(e.upper >= hi - 1e-9);
      CHECK(lo - e.lower <= 0.1);
      CHECK(e.upper - hi <= 0.1);
    }
  }

  TEST_CASE("single observation on a three-point grid is estimated at zero") {
    const DeconvolutionModel m = model_for(vec({0.0}), 3);
    const MpeEstimate est = mpe_estimate(m, fast_config());
    CHECK(std::abs(est.mid[0]) <= 1e-6);
  }

  TEST_CASE("estimates are reflection and translation equivariant") {
    const Vector x = vec({-1.1, 0.3, 0.35, 2.0, -0.4, 1.2});
    const MpeEstimate base = mpe_estimate(model_for(x, 60), fast_config());
    const MpeEstimate refl = mpe_estimate(model_for(-x, 60), fast_config());
    const MpeEstimate shift = mpe_estimate(model_for(x.array() + 3.5, 60), fast_config());
    CHECK((base.mid + refl.mid).lpNorm<Eigen::Infinity>() <= 1e-4);
    CHECK((base.lower + refl.upper).lpNorm<Eigen::Infinity>() <= 1e-4);
    CHECK((shift.mid.array() - 3.5 - base.mid.array()).abs().maxCoeff() <= 1e-4);
    CHECK((base.lower.array() <= base.mid.array() + 1e-12).all());
    CHECK((base.mid.array() <= base.upper.array() + 1e-12).all());
  }

  TEST_CASE("endpoint indices follow the tail rules") {
    const Vector pmf = vec({0.01, 0.02, 0.07, 0.8, 0.05, 0.05});
    const EndpointIndices e = endpoint_indices(pmf, 0.1);
    CHECK(e.left == 1);
    CHECK(e.right == 5);
    const EndpointIndices f = endpoint_indices(vec({0.5, 0.5}), 0.1);
    CHECK(f.left == 0);
    CHECK(f.right == 1);
  }

  TEST_CASE("interval ladder is nested in the threshold") {
    const Vector x = vec({-1.0, 0.2, 0.5, 1.7, -0.3});
    const DeconvolutionModel m = model_for(x, 40);
    const MpeFit fit = mpe_fit(m, fast_config());
    const std::vector<double> th{fit.b_min + 0.05, fit.b_min + 0.5, fit.b_min + 0.2};
    const auto sets = interval_ladder(m, fit, th, 0.1, fast_config());
    REQUIRE(sets.size() == 3);
    const IntervalSet& a = sets[0];
    const IntervalSet& b = sets[2];
    const IntervalSet& c = sets[1];
    CHECK((b.lower.array() <= a.lower.array()).all());
    CHECK((c.lower.array() <= b.lower.array()).all());
    CHECK((b.upper.array() >= a.upper.array()).all());
    CHECK((c.upper.array() >= b.upper.array()).all());
    for (Index i = 0; i < 5; ++i) {
      const auto [l, u] = interval_endpoints_given_gamma(m.grid(), fit.gamma_star, x[i], 0.1);
      CHECK(a.lower[i] <= l + 1e-12);
      CHECK(a.upper[i] >= u - 1e-12);
    }
  }

  TEST_CASE("coverage respects the product bound on a small problem") {
    const Index n = 3, K = 15;
    const double alpha = 0.2, pi = 0.2;
    const int reps = 200;
    std::vector<double> cover;
    for (int r = 0; r < reps; ++r) {
      RandomStream rng = RandomStream::substream(77, static_cast<std::uint64_t>(r));
      Vector theta(n), x(n);
      for (Index i = 0; i < n; ++i) {
        theta[i] = rng.normal();
        x[i] = theta[i] + rng.normal();
      }
      const DeconvolutionModel m = model_for(x, K);
      const MpeFit fit = mpe_fit(m, fast_config());
      const IntervalSet s = plausibility_intervals(m, fit, pi, alpha, fast_config(), rng, 5000);
      double c = 0.0;
      for (Index i = 0; i < n; ++i) c += (s.lower[i] <= theta[i] && theta[i] <= s.upper[i]);
      cover.push_back(c / n);
    }
    const double mean = std::accumulate(cover.begin(), cover.end(), 0.0) / reps;
    double var = 0.0;
    for (double c : cover) var += (c - mean) * (c - mean);
    const double se = std::sqrt(var / (reps - 1) / reps);
    CHECK(mean >= (1.0 - pi) * (1.0 - alpha) - 3.0 * se);
  }

  TEST_CASE("adaptive ladder has nondecreasing coverage") {
    const DeconvolutionModel m = model_for(vec({-0.6, 0.1, 0.9, 1.4}), 30);
    RandomStream rng(31);
    const AdaptiveResult r = adaptive_adjust(m, 0.9, 4, 20, rng, fast_config(), 2000);
    REQUIRE(r.ladder.size() == 4);
    for (std::size_t s = 1; s < r.ladder.size(); ++s) {
      CHECK(r.ladder[s].coverage >= r.ladder[s - 1].coverage);
      CHECK(r.ladder[s].threshold >= r.ladder[s - 1].threshold);
    }
    CHECK(r.s_star >= 1);
    CHECK(r.s_star <= 4);
    RandomStream rng2(31);
    CHECK_THROWS_AS(adaptive_adjust(m, 0.9, 4, 19, rng2, fast_config(), 2000), InvalidParameter);
  }

  TEST_CASE("within-experiment diagnostic counts misses") {
    IntervalSet s;
    s.lower = vec({-1.0, 0.0, 2.0});
    s.upper = vec({1.0, 0.5, 3.0});
    const Diagnostic d = within_experiment_diagnostic(s, vec({0.0, 1.0, 1.0}), 0.1);
    CHECK(d.count_outside == 2);
    CHECK(d.expected == doctest::Approx(0.15));
  }
}

#include <doctest.h>

#include <algorithm>
#include <numeric>

#include "plausmeans/classic_im.hpp"
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

}  // namespace

TEST_SUITE("classic_im") {
  TEST_CASE("classic association equals the eb association with uniform weights on theta") {
    RandomStream rng(41);
    for (int t = 0; t < 50; ++t) {
      const Index n = 2 + static_cast<Index>(rng.below(10));
      Vector theta(n), x(n);
      for (Index i = 0; i < n; ++i) {
        theta[i] = 2.0 * rng.normal();
        x[i] = theta[i] + rng.normal();
      }
      const ThetaCollection tc(theta);
      const SortedSample s = SortedSample::from(x);
      const BoundarySpec spec(n);
      const double classic = classic_association_value(tc, s, spec);
      const double eb = association_value(Grid(tc.sorted()), Vector::Constant(n, 1.0 / static_cast<double>(n)), s, spec);
      CHECK(std::abs(classic - eb) <= 1e-12 * std::max(1.0, std::abs(eb)));
    }
  }

  TEST_CASE("marginal cdf averages normal cdfs") {
    const ThetaCollection tc(vec({1.0, -1.0, 0.5}));
    const double x = 0.2;
    const double ref = (normal_cdf(x - 1.0) + normal_cdf(x + 1.0) + normal_cdf(x - 0.5)) / 3.0;
    CHECK(marginal_cdf(tc, x) == doctest::Approx(ref).epsilon(1e-15));
    CHECK(tc.sorted() == vec({-1.0, 0.5, 1.0}));
  }

  TEST_CASE("classic association gradient matches central differences") {
    RandomStream rng(42);
    for (int t = 0; t < 100; ++t) {
      const Index n = 2 + static_cast<Index>(rng.below(8));
      Vector theta(n), x(n);
      for (Index i = 0; i < n; ++i) {
        theta[i] = rng.normal();
        x[i] = theta[i] + rng.normal();
      }
      const SortedSample s = SortedSample::from(x);
      const BoundarySpec spec(n);
      Vector g;
      classic_association(theta, s, spec, &g);
      const Vector fd = testutil::central_difference(
          [&](const Vector& v) { return classic_association(v, s, spec); }, theta, 1e-6);
      CHECK(testutil::relative_error(g, fd) <= 1e-5);
    }
  }

  TEST_CASE("fit lowers the association and keeps theta sorted") {
    const Vector x = vec({-2.1, -1.7, 0.1, 0.3, 1.9, 2.5, 2.2});
    const SortedSample s = SortedSample::from(x);
    const BoundarySpec spec(x.size());
    const ClassicFit fit = classic_mpe_fit(s, spec, OptimizerConfig{});
    CHECK(fit.b_at_fit <= fit.b_at_start + 1e-12);
    const Vector& th = fit.theta_hat.sorted();
    CHECK(std::is_sorted(th.data(), th.data() + th.size()));
    CHECK(classic_association_value(fit.theta_hat, s, spec) == doctest::Approx(fit.b_at_fit).epsilon(1e-10));
  }

  TEST_CASE("single observation is estimated by itself") {
    const Vector x = vec({1.37});
    const Vector est = classic_point_estimate(x, BoundarySpec(1), OptimizerConfig{});
    CHECK(est[0] == doctest::Approx(1.37).epsilon(1e-6));
  }

  TEST_CASE("partial conditional estimate is a likelihood-weighted average") {
    const ThetaCollection tc(vec({-1.0, 0.0, 2.0}));
    const Vector x = vec({0.4, 1.5});
    const Vector est = partial_conditional_estimate(tc, x);
    for (Index i = 0; i < 2; ++i) {
      double num = 0.0, den = 0.0;
      for (Index k = 0; k < 3; ++k) {
        const double w = normal_pdf(x[i] - tc[k]);
        num += w * tc[k];
        den += w;
      }
      CHECK(est[i] == doctest::Approx(num / den).epsilon(1e-14));
    }
  }

  TEST_CASE("full conditional enumeration matches a permutation Monte Carlo oracle") {
    RandomStream rng(43);
    for (Index n : {2, 4, 6}) {
      Vector theta(n), x(n);
      for (Index i = 0; i < n; ++i) {
        theta[i] = 1.5 * rng.normal();
        x[i] = theta[i] + rng.normal();
      }
      const ThetaCollection tc(theta);
      const Vector exact = full_conditional_estimate(tc, x);
      const testutil::McEstimate mc = testutil::permutation_oracle(tc.sorted(), x, 200000, rng);
      for (Index i = 0; i < n; ++i) CHECK(std::abs(exact[i] - mc.mean[i]) <= 3.0 * mc.se[i] + 1e-12);
    }
    CHECK_THROWS_AS(full_conditional_estimate(ThetaCollection(Vector::LinSpaced(11, 0.0, 1.0)),
                                              Vector::Zero(11)),
                    InvalidParameter);
  }

  TEST_CASE("assertion plausibility is a valid fraction and reproducible") {
    const Vector x = vec({0.1, -0.4, 1.2, 0.8});
    const SortedSample s = SortedSample::from(x);
    const BoundarySpec spec(4);
    RandomStream a(5), b(5);
    const double p = assertion_specific_plausibility(ThetaCollection(x), s, spec, 500, a);
    CHECK(p >= 0.0);
    CHECK(p <= 1.0);
    CHECK(p == assertion_specific_plausibility(ThetaCollection(x), s, spec, 500, b));
  }
}

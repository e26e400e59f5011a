#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <vector>

#include "plausmeans/core.hpp"
#include "plausmeans/prs.hpp"
#include "test_util.hpp"

using namespace plausmeans;

namespace {

// Closed form for n = 1: B(u) = -c ln(u(1-u)), so P(B(U) <= b) = sqrt(1 - 4 exp(-b/c)).
double n1_cdf(double b, double c) {
  const double t = 1.0 - 4.0 * std::exp(-b / c);
  return t <= 0.0 ? 0.0 : std::sqrt(t);
}

double n1_quantile(double level, double c) { return -c * std::log((1.0 - level * level) / 4.0); }

}  // namespace

TEST_SUITE("core") {
  TEST_CASE("normal quantile matches reference values") {
    CHECK(normal_quantile(0.5) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK(normal_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-13));
    CHECK(normal_quantile(1e-4) == doctest::Approx(-3.719016485455709).epsilon(1e-12));
    CHECK(normal_quantile(0.9999) == doctest::Approx(3.719016485455709).epsilon(1e-12));
    for (double p : {1e-10, 0.01, 0.3, 0.77, 0.999})
      CHECK(normal_cdf(normal_quantile(p)) == doctest::Approx(p).epsilon(1e-12));
  }

  TEST_CASE("log_sum_exp is stable for large arguments") {
    Vector v(3);
    v << 1000.0, 1000.0, 1000.0;
    CHECK(log_sum_exp(v) == doctest::Approx(1000.0 + std::log(3.0)));
    v << -1000.0, -1001.0, -1002.0;
    CHECK(log_sum_exp(v) ==
          doctest::Approx(-1000.0 + std::log(1.0 + std::exp(-1.0) + std::exp(-2.0))));
  }

  TEST_CASE("pairwise sum agrees with compensated reference") {
    std::vector<double> v(10001);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = 1.0 / static_cast<double>(i + 1);
    long double ref = 0.0L;
    for (double d : v) ref += d;
    CHECK(pairwise_sum(v.data(), v.size()) == doctest::Approx(static_cast<double>(ref)).epsilon(1e-14));
    CHECK(pairwise_sum(v.data(), 0) == 0.0);
  }

  TEST_CASE("substreams are reproducible and distinct") {
    RandomStream a = RandomStream::substream(7, 3), b = RandomStream::substream(7, 3);
    RandomStream c = RandomStream::substream(7, 4);
    bool differs = false;
    for (int i = 0; i < 100; ++i) {
      const auto x = a.bits(), y = b.bits(), z = c.bits();
      CHECK(x == y);
      differs = differs || (x != z);
    }
    CHECK(differs);
    RandomStream u(1);
    for (int i = 0; i < 10000; ++i) {
      const double v = u.uniform();
      REQUIRE(v > 0.0);
      REQUIRE(v < 1.0);
    }
  }
}

TEST_SUITE("prs") {
  TEST_CASE("weights and offsets follow the defining formulas") {
    for (Index n : {1, 2, 5, 20}) {
      for (double nu : {0.0, 1.0, 2.0}) {
        const BoundarySpec spec(n, 0.6, nu);
        std::vector<double> w(static_cast<std::size_t>(n));
        double total = 0.0;
        for (Index i = 1; i <= n; ++i) {
          w[static_cast<std::size_t>(i - 1)] =
              std::pow(static_cast<double>(i) * static_cast<double>(n - i + 1), -nu / 2.0);
          total += w[static_cast<std::size_t>(i - 1)];
        }
        for (Index i = 1; i <= n; ++i) {
          const double wi = w[static_cast<std::size_t>(i - 1)] / total;
          CHECK(spec.weights()[i - 1] == doctest::Approx(wi).epsilon(1e-14));
          CHECK(spec.a()[i - 1] == doctest::Approx(wi * (static_cast<double>(i - 1) + 0.6)).epsilon(1e-14));
          CHECK(spec.b()[i - 1] == doctest::Approx(wi * (static_cast<double>(n - i) + 0.6)).epsilon(1e-14));
        }
      }
    }
  }

  TEST_CASE("invalid boundary parameters are rejected") {
    CHECK_THROWS_AS(BoundarySpec(0), InvalidParameter);
    CHECK_THROWS_AS(BoundarySpec(3, 0.0), InvalidParameter);
    CHECK_THROWS_AS(BoundarySpec(3, 0.5, -1.0), InvalidParameter);
    const BoundarySpec spec(3);
    CHECK_THROWS_AS(boundary(spec, Vector::Constant(2, 0.5)), DimensionMismatch);
  }

  TEST_CASE("n = 1 boundary values") {
    const BoundarySpec spec(1);
    Vector u(1);
    u << 0.5;
    CHECK(boundary(spec, u) == doctest::Approx(4.0 / 3.0 * std::log(2.0)).epsilon(1e-14));
    CHECK(spec.coordinate_minimizer()[0] == doctest::Approx(0.5));
    u << 0.0;
    CHECK(std::isfinite(boundary(spec, u)));
  }

  TEST_CASE("boundary gradient matches central differences") {
    RandomStream rng(11);
    int checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
      const Index n = 1 + static_cast<Index>(rng.below(30));
      const BoundarySpec spec(n, 0.3 + rng.uniform(), 2.0 * rng.uniform());
      const Vector u = sample_sorted_uniforms(n, rng).array() * 0.98 + 0.01;
      const Vector g = boundary_gradient(spec, u);
      const Vector fd = testutil::central_difference(
          [&](const Vector& v) { return boundary(spec, v); }, u, 1e-6);
      CHECK(testutil::relative_error(g, fd) <= 1e-5);
      ++checked;
    }
    CHECK(checked == 100);
  }

  TEST_CASE("sorted uniforms are sorted and inside the unit interval") {
    RandomStream rng(5);
    const Vector u = sample_sorted_uniforms(50, rng);
    CHECK(std::is_sorted(u.data(), u.data() + u.size()));
    CHECK(u.minCoeff() > 0.0);
    CHECK(u.maxCoeff() < 1.0);
  }

  TEST_CASE("type-7 quantile") {
    std::vector<double> v{4.0, 1.0, 3.0, 2.0};
    CHECK(empirical_quantile(v, 0.5) == doctest::Approx(2.5));
    CHECK(empirical_quantile(v, 0.0) == 1.0);
    CHECK(empirical_quantile(v, 1.0) == 4.0);
    CHECK(empirical_quantile(v, 1.0 / 3.0) == doctest::Approx(2.0));
  }

  TEST_CASE("n = 1 quantile matches the closed form") {
    CHECK(n1_quantile(0.5, 2.0 / 3.0) == doctest::Approx(1.1160).epsilon(1e-4));
    const BoundarySpec spec(1);
    RandomStream rng(3);
    const int N = 200000;
    for (double level : {0.1, 0.5, 0.9}) {
      const double q = boundary_quantile(spec, level, N, rng);
      const double se = std::sqrt(level * (1.0 - level) / N);
      CHECK(std::abs(n1_cdf(q, 2.0 / 3.0) - level) <= 4.0 * se);
    }
  }

  TEST_CASE("predictive random set is calibrated") {
    RandomStream qrng(101), erng(202);
    const int Nq = 100000, Ne = 50000;
    for (Index n : {5, 20}) {
      const BoundarySpec spec(n);
      const std::vector<double> dist = boundary_distribution(spec, Nq, qrng);
      for (double pi : {0.05, 0.25, 0.5}) {
        std::vector<double> copy = dist;
        const double q = empirical_quantile(copy, 1.0 - pi);
        int above = 0;
        for (int r = 0; r < Ne; ++r) above += boundary(spec, sample_sorted_uniforms(n, erng)) > q;
        const double rate = static_cast<double>(above) / Ne;
        const double se = std::sqrt(pi * (1.0 - pi) * (1.0 / Ne + 1.0 / Nq));
        CHECK(std::abs(rate - pi) <= 3.0 * se);
      }
    }
  }

  TEST_CASE("boundary distribution is reproducible under a fixed seed") {
    const BoundarySpec spec(7);
    RandomStream a(9), b(9);
    CHECK(boundary_distribution(spec, 5000, a) == boundary_distribution(spec, 5000, b));
  }
}

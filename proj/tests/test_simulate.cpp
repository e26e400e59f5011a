#include <doctest.h>

#include <cstdlib>

#include "plausmeans/simulate.hpp"

using namespace plausmeans;

TEST_SUITE("simulate") {
  TEST_CASE("scenario names round-trip") {
    for (const char* name : {"single_mode", "two_mode", "outlier"}) CHECK(Scenario::named(name, 5).name() == name);
    CHECK_THROWS_AS(Scenario::named("bimodal", 5), InvalidParameter);
    CHECK(parse_method("js") == Method::james_stein);
    CHECK(method_name(parse_method("classic_im")) == "classic_im");
    CHECK_THROWS_AS(parse_method("ridge"), InvalidParameter);
    CHECK_THROWS_AS(CoverageLevel::nominal_level(0.99), InvalidParameter);
    CHECK(CoverageLevel::table_rows().size() == 5);
  }

  TEST_CASE("scenario draws have the documented structure") {
    RandomStream rng(51);
    const int draws = 20000;
    double sum = 0.0, sumsq = 0.0;
    int near_modes = 0, zeros = 0;
    for (int r = 0; r < draws / 100; ++r) {
      const Replicate s = generate_replicate(Scenario::named("single_mode", 100), rng);
      sum += s.theta.sum();
      sumsq += s.theta.squaredNorm();
      const Replicate t = generate_replicate(Scenario::named("two_mode", 100), rng);
      near_modes += static_cast<int>(((t.theta.array().abs() - 2.0).abs() < 0.6).count());
      const Replicate o = generate_replicate(Scenario::named("outlier", 100), rng);
      zeros += static_cast<int>((o.theta.array() == 0.0).count());
      CHECK(s.x.size() == 100);
    }
    CHECK(std::abs(sum / draws) < 0.01);
    CHECK(std::sqrt(sumsq / draws) == doctest::Approx(0.1).epsilon(0.05));
    CHECK(near_modes == draws);
    CHECK(static_cast<double>(zeros) / draws == doctest::Approx(0.9).epsilon(0.02));
  }

  TEST_CASE("mse study is deterministic and thread-count invariant") {
    const Scenario sc = Scenario::named("two_mode", 8);
    const std::vector<Method> methods{Method::mle, Method::james_stein, Method::eb_im};
    OptimizerConfig cfg;
    cfg.starts = 2;
    setenv("PLAUS_MEANS_THREADS", "1", 1);
    const ReplicationReport a = run_mse_study(sc, methods, 6, 40, 9, cfg);
    setenv("PLAUS_MEANS_THREADS", "3", 1);
    const ReplicationReport b = run_mse_study(sc, methods, 6, 40, 9, cfg);
    unsetenv("PLAUS_MEANS_THREADS");
    CHECK(b.threads == 3);
    for (const char* m : {"mle", "james_stein", "eb_im"})
      CHECK(a.method(m).per_replicate == b.method(m).per_replicate);
  }

  TEST_CASE("mle mse is near one") {
    const ReplicationReport r =
        run_mse_study(Scenario::named("single_mode", 50), {Method::mle}, 200, 50, 1, OptimizerConfig{});
    const MethodSummary& m = r.method("mle");
    CHECK(m.used == 200);
    CHECK(std::abs(m.mse - 1.0) <= 4.0 * m.se);
    CHECK(m.se > 0.0);
  }
}

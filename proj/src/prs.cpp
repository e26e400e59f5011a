#include "plausmeans/prs.hpp"

#include <algorithm>
#include <vector>

namespace plausmeans {

BoundarySpec::BoundarySpec(Index n, double c_n, double nu) : n_(n), c_n_(c_n), nu_(nu) {
  if (n < 1) throw InvalidParameter("boundary spec: n must be at least 1");
  if (!(c_n > 0.0)) throw InvalidParameter("boundary spec: c_n must be positive");
  if (!(nu >= 0.0 && nu <= 2.0)) throw InvalidParameter("boundary spec: nu must lie in [0, 2]");

  w_.resize(n);
  for (Index i = 0; i < n; ++i) {
    const double k = static_cast<double>(i + 1);
    w_[i] = std::pow(k * (static_cast<double>(n) - k + 1.0), -nu / 2.0);
  }
  w_ /= w_.sum();

  a_.resize(n);
  b_.resize(n);
  for (Index i = 0; i < n; ++i) {
    const double k = static_cast<double>(i + 1);
    a_[i] = w_[i] * (k - 1.0 + c_n);
    b_[i] = w_[i] * (static_cast<double>(n) - k + c_n);
  }
}

Vector sample_sorted_uniforms(Index n, RandomStream& rng) {
  if (n < 1) throw InvalidParameter("sample_sorted_uniforms: n must be at least 1");
  Vector u(n);
  for (Index i = 0; i < n; ++i) u[i] = rng.uniform();
  std::sort(u.begin(), u.end());
  return u;
}

double empirical_quantile(std::span<double> values, double level) {
  if (values.empty()) throw InvalidParameter("empirical_quantile: empty sample");
  if (!(level >= 0.0 && level <= 1.0))
    throw InvalidParameter("empirical_quantile: level outside [0, 1]");
  std::sort(values.begin(), values.end());
  const double h = level * static_cast<double>(values.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

std::vector<double> boundary_distribution(const BoundarySpec& spec, int mc_samples,
                                          RandomStream& rng) {
  if (mc_samples < 100) throw InvalidParameter("boundary quantile: mc_samples must be >= 100");
  std::vector<double> draws(static_cast<std::size_t>(mc_samples));
  Vector u(spec.n());
  for (auto& d : draws) {
    for (Index i = 0; i < spec.n(); ++i) u[i] = rng.uniform();
    std::sort(u.begin(), u.end());
    d = boundary(spec, u);
  }
  std::sort(draws.begin(), draws.end());
  return draws;
}

double boundary_quantile(const BoundarySpec& spec, double level, int mc_samples,
                         RandomStream& rng) {
  if (!(level > 0.0 && level < 1.0))
    throw InvalidParameter("boundary_quantile: level must lie in (0, 1)");
  auto draws = boundary_distribution(spec, mc_samples, rng);
  return empirical_quantile(draws, level);
}

}  // namespace plausmeans

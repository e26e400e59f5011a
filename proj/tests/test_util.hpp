#pragma once

#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "plausmeans/core.hpp"

namespace testutil {

using plausmeans::Index;
using plausmeans::RandomStream;
using plausmeans::Vector;
using plausmeans::normal_log_pdf;

inline Vector dirichlet(Index K, RandomStream& rng) {
  Vector g(K);
  for (Index k = 0; k < K; ++k) g[k] = rng.exponential();
  return g / g.sum();
}

// Gamma(shape, 1) by Marsaglia-Tsang, boosted by U^(1/shape) below shape 1.
inline double gamma_draw(double shape, RandomStream& rng) {
  if (shape < 1.0) return gamma_draw(shape + 1.0, rng) * std::pow(rng.uniform(), 1.0 / shape);
  const double d = shape - 1.0 / 3.0, c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    const double z = rng.normal(), v = std::pow(1.0 + c * z, 3);
    if (v <= 0.0) continue;
    if (std::log(rng.uniform()) < 0.5 * z * z + d - d * v + d * std::log(v)) return d * v;
  }
}

// Dirichlet(shape); small shapes concentrate near the vertices.
inline Vector dirichlet(Index K, double shape, RandomStream& rng) {
  Vector g(K);
  for (Index k = 0; k < K; ++k) g[k] = gamma_draw(shape, rng);
  const double total = g.sum();
  if (!(total > 0.0)) {
    g.setZero();
    g[static_cast<Index>(rng.below(static_cast<std::uint64_t>(K)))] = 1.0;
    return g;
  }
  return g / total;
}

inline Vector central_difference(const std::function<double(const Vector&)>& f, const Vector& x,
                                 double h) {
  Vector g(x.size());
  for (Index k = 0; k < x.size(); ++k) {
    Vector xp = x, xm = x;
    xp[k] += h;
    xm[k] -= h;
    g[k] = (f(xp) - f(xm)) / (2.0 * h);
  }
  return g;
}

inline double relative_error(const Vector& a, const Vector& b) {
  return (a - b).norm() / std::max(1.0, b.norm());
}

struct McEstimate {
  Vector mean;
  Vector se;
};

// Self-normalized importance sampling over uniformly drawn permutations.
inline McEstimate permutation_oracle(const Vector& theta, const Vector& x, int draws, RandomStream& rng) {
  const Index n = x.size();
  std::vector<Index> tau(static_cast<std::size_t>(n));
  std::vector<double> w(static_cast<std::size_t>(draws));
  std::vector<Vector> values(static_cast<std::size_t>(draws), Vector(n));
  for (int d = 0; d < draws; ++d) {
    std::iota(tau.begin(), tau.end(), Index{0});
    for (Index i = n - 1; i > 0; --i)
      std::swap(tau[static_cast<std::size_t>(i)],
                tau[static_cast<std::size_t>(rng.below(static_cast<std::uint64_t>(i + 1)))]);
    double logw = 0.0;
    for (Index j = 0; j < n; ++j) {
      const double t = theta[tau[static_cast<std::size_t>(j)]];
      logw += normal_log_pdf(x[j] - t);
      values[static_cast<std::size_t>(d)][j] = t;
    }
    w[static_cast<std::size_t>(d)] = std::exp(logw);
  }
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  McEstimate out{Vector::Zero(n), Vector::Zero(n)};
  for (int d = 0; d < draws; ++d) out.mean += w[static_cast<std::size_t>(d)] * values[static_cast<std::size_t>(d)];
  out.mean /= total;
  for (int d = 0; d < draws; ++d) {
    const double wn = w[static_cast<std::size_t>(d)] / total;
    out.se += (wn * wn * (values[static_cast<std::size_t>(d)] - out.mean).array().square()).matrix();
  }
  out.se = out.se.cwiseSqrt();
  return out;
}

}  // namespace testutil

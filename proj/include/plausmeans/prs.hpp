#pragma once

// Predictive random set on sorted uniforms.
//
// The focal elements are the sublevel sets {u : B(u) <= b} of the boundary
// function
//
//     B(u) = -sum_i [ a_i ln u_i + b_i ln(1 - u_i) ],
//
// with weights a_i = w_i (i - 1 + c_n), b_i = w_i (n - i + c_n) and
// w_i proportional to [i (n - i + 1)]^(-nu/2), normalized to sum to one.

#include <algorithm>
#include <span>

#include "plausmeans/core.hpp"

namespace plausmeans {

inline constexpr double kDefaultOffset = 2.0 / 3.0;
inline constexpr double kDefaultNu = 2.0;
inline constexpr double kUniformClamp = 1e-12;
inline constexpr int kDefaultQuantileSamples = 100000;

class BoundarySpec {
 public:
  BoundarySpec(Index n, double c_n = kDefaultOffset, double nu = kDefaultNu);

  Index n() const { return n_; }
  double offset() const { return c_n_; }
  double nu() const { return nu_; }
  const Vector& weights() const { return w_; }
  const Vector& a() const { return a_; }
  const Vector& b() const { return b_; }

  // Per-coordinate minimizer a_i / (a_i + b_i).
  Vector coordinate_minimizer() const { return a_.array() / (a_.array() + b_.array()); }

  bool operator==(const BoundarySpec&) const = default;

 private:
  Index n_;
  double c_n_;
  double nu_;
  Vector w_, a_, b_;
};

inline BoundarySpec make_boundary_spec(Index n, double c_n = kDefaultOffset,
                                       double nu = kDefaultNu) {
  return BoundarySpec(n, c_n, nu);
}

namespace detail {
inline double clamp_unit(double u) {
  return std::clamp(u, kUniformClamp, 1.0 - kUniformClamp);
}

template <typename Derived>
void check_boundary_args(const BoundarySpec& spec, const Eigen::MatrixBase<Derived>& u) {
  if (u.size() != spec.n())
    throw DimensionMismatch("boundary: expected " + std::to_string(spec.n()) +
                            " coordinates, got " + std::to_string(u.size()));
  if (u.hasNaN()) throw NumericalError("boundary: NaN coordinate");
}
}  // namespace detail

// B(u). Coordinates are clamped to [1e-12, 1 - 1e-12] so the value is finite
// on the closed cube.
template <typename Derived>
double boundary(const BoundarySpec& spec, const Eigen::MatrixBase<Derived>& u) {
  detail::check_boundary_args(spec, u);
  double sum = 0.0;
  for (Index i = 0; i < spec.n(); ++i) {
    const double ui = detail::clamp_unit(u[i]);
    sum += spec.a()[i] * std::log(ui) + spec.b()[i] * std::log1p(-ui);
  }
  return -sum;
}

// dB/du_i = -a_i/u_i + b_i/(1 - u_i), evaluated at the clamped point.
template <typename Derived>
Vector boundary_gradient(const BoundarySpec& spec, const Eigen::MatrixBase<Derived>& u) {
  detail::check_boundary_args(spec, u);
  Vector g(spec.n());
  for (Index i = 0; i < spec.n(); ++i) {
    const double ui = detail::clamp_unit(u[i]);
    g[i] = -spec.a()[i] / ui + spec.b()[i] / (1.0 - ui);
  }
  return g;
}

// n iid Uniform(0,1) draws, sorted ascending.
Vector sample_sorted_uniforms(Index n, RandomStream& rng);

// Type-7 empirical quantile of a sample (sorted in place).
double empirical_quantile(std::span<double> values, double level);

// Monte Carlo level-quantile of B(U) for U a sorted uniform sample of size n.
double boundary_quantile(const BoundarySpec& spec, double level, int mc_samples,
                         RandomStream& rng);

// Draws of B(U) sorted ascending; lets callers take several quantiles from one
// Monte Carlo run.
std::vector<double> boundary_distribution(const BoundarySpec& spec, int mc_samples,
                                          RandomStream& rng);

}  // namespace plausmeans

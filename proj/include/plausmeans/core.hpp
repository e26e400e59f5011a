#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace plausmeans {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using Index = Eigen::Index;

// Error taxonomy. The CLI maps InputError to exit code 2 and
// NumericalError (and subclasses) to exit code 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidParameter : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class InputError : public Error {
 public:
  InputError(const std::string& what, std::size_t line = 0)
      : Error(line ? what + " (line " + std::to_string(line) + ")" : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

class OptimizerFailure : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class InfeasibleStart : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

// ---------------------------------------------------------------------------
// Standard normal helpers.

inline double normal_pdf(double z) {
  constexpr double inv_sqrt_2pi = 0.3989422804014326779399461;
  return inv_sqrt_2pi * std::exp(-0.5 * z * z);
}

inline double normal_log_pdf(double z) {
  constexpr double log_inv_sqrt_2pi = -0.9189385332046727417803297;
  return log_inv_sqrt_2pi - 0.5 * z * z;
}

inline double normal_cdf(double z) { return 0.5 * std::erfc(-z * 0.7071067811865475244008444); }

double normal_quantile(double p);

// ---------------------------------------------------------------------------
// Random streams.
//
// Every Monte Carlo consumer takes an explicit RandomStream. Substreams are
// derived from a master seed by a counter-based split (splitmix64 mixing of
// seed and stream index), so the i-th replicate sees the same numbers no
// matter which thread runs it or in which order.

constexpr std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

class RandomStream {
 public:
  explicit RandomStream(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  static RandomStream substream(std::uint64_t master_seed, std::uint64_t index) {
    return RandomStream(splitmix64(master_seed ^ splitmix64(index + 0x632be59bd9b4e019ULL)));
  }

  // Uniform on the open interval (0, 1).
  double uniform() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double normal() { return normal_(engine_); }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  std::uint64_t bits() { return engine_(); }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    return std::uniform_int_distribution<std::uint64_t>(0, n - 1)(engine_);
  }

  // Standard exponential, used for Dirichlet(1) draws.
  double exponential() { return -std::log(uniform()); }

 private:
  std::mt19937_64 engine_;
  std::normal_distribution<double> normal_;
};

// Numerically stable log(sum(exp(v))).
template <typename Derived>
double log_sum_exp(const Eigen::MatrixBase<Derived>& v) {
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  return m + std::log((v.array() - m).exp().sum());
}

// Pairwise summation over a contiguous range; the result is independent of
// how the range was filled.
double pairwise_sum(const double* data, std::size_t count);

}  // namespace plausmeans

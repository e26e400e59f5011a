#pragma once

// Constrained smooth minimization on the probability simplex or on a box,
// optionally subject to one smooth inequality h(x) <= threshold.
//
// Inner solvers:
//   simplex  spectral projected gradient (Barzilai-Borwein step, monotone
//            Armijo backtracking, exact sort-and-threshold projection)
//   box      projected limited-memory BFGS with Armijo backtracking along
//            the projected path
// The inequality is handled by a Powell-Hestenes-Rockafellar augmented
// Lagrangian outer loop.

#include <functional>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include "plausmeans/core.hpp"

namespace plausmeans {

struct OptimizerConfig {
  int max_outer_iters = 40;
  int max_inner_iters = 5000;
  double feasibility_tol = 1e-8;
  // Relative stationarity target: projected-gradient norm <= tol * (1 + |f|).
  double objective_tol = 1e-9;
  double penalty_growth = 10.0;
  double initial_penalty = 1.0;
  double step_tol = 1e-12;
  std::uint64_t seed = 0;

  // First-order tolerance used as the convergence test.
  double gradient_tol = 1e-6;

  // Multi-start count for fits that use it: anchored start, uniform, then
  // Dirichlet(1) draws from the seeded stream.
  int starts = 5;
  // Extra anchored starts built from resampled data (off by default).
  int resampled_starts = 0;

  void validate() const;
};

struct OptResult {
  Vector x_star;
  double f_star = 0.0;
  double constraint_violation = 0.0;
  int iterations = 0;
  bool converged = false;
  // (merit before, merit after) for every inner solve; merit is the
  // augmented objective with the multiplier and penalty of that solve.
  std::vector<std::pair<double, double>> merit_trace;
};

// Value of a smooth function; fills *grad when grad is non-null.
using SmoothFunction = std::function<double(const Vector& x, Vector* grad)>;

struct SimplexDomain {
  Index dim = 0;
};

struct BoxDomain {
  Vector lower;
  Vector upper;

  static BoxDomain unbounded(Index dim);
};

using Domain = std::variant<SimplexDomain, BoxDomain>;

enum class Sense { minimize, maximize };

// Euclidean projection onto {x : x >= 0, sum x = 1}.
Vector project_to_simplex(const Vector& v);
Vector project_to_domain(const Domain& domain, const Vector& x);

// Norm of P(x - g) - x, the projected-gradient stationarity measure.
double projected_gradient_norm(const Domain& domain, const Vector& x, const Vector& g);

// Distance-to-domain measure: for the simplex, max(|sum x - 1|, max(-x_k)).
double domain_violation(const Domain& domain, const Vector& x);

// Minimizes f over the simplex of dimension K. Starts from the uniform vector
// unless a start is given.
OptResult minimize_on_simplex(const SmoothFunction& objective, Index K,
                              const OptimizerConfig& config,
                              const std::optional<Vector>& start = std::nullopt);

// Bound-constrained or simplex-constrained minimization from a start point.
OptResult minimize_on_domain(const SmoothFunction& objective, const Domain& domain,
                             const Vector& start, const OptimizerConfig& config);

// Optimizes f subject to h(x) <= threshold and x in the domain. A start
// violating the constraint is first moved into the feasible set by minimizing
// h; InfeasibleStart is thrown when that fails. The returned point always
// satisfies h(x*) <= threshold + feasibility_tol. For Sense::maximize f_star is
// the maximum of f.
//
// When good_enough is given the search stops at the first feasible iterate
// whose objective is strictly better than it (below for minimize, above for
// maximize); callers asking a yes/no question about the optimum use this.
OptResult optimize_with_inequality(const SmoothFunction& objective,
                                   const SmoothFunction& constraint, double threshold,
                                   const Domain& domain, const Vector& start, Sense sense,
                                   const OptimizerConfig& config,
                                   std::optional<double> good_enough = std::nullopt);

// ---------------------------------------------------------------------------
// Structured problems phi(A x) on the simplex, with phi separable and convex
// on R^n and A an n x K matrix. Used where the generic solvers above are too
// slow to resolve very thin sublevel sets.

// Value of phi at u; fills the gradient and the Hessian diagonal when asked.
using SeparableFunction = std::function<double(const Vector& u, Vector* grad, Vector* hess_diag)>;

struct CompositeProblem {
  const Matrix* A = nullptr;
  SeparableFunction phi;
};

struct CompositeResult {
  Vector x;
  double f = 0.0;    // phi(A x) + linear . x
  double phi = 0.0;  // phi(A x)
  double gap = 0.0;  // Frank-Wolfe duality gap, an upper bound on f - min f
  int iterations = 0;
  bool converged = false;
};

// Minimizes phi(A x) + linear . x over the simplex by fully corrective
// Frank-Wolfe: each step adds the best vertex, then runs projected Newton on
// the current support. Pass an empty `linear` for none.
CompositeResult minimize_composite_on_simplex(const CompositeProblem& problem, const Vector& linear,
                                              const Vector& start, const OptimizerConfig& config);

struct SublevelResult {
  Vector x;                  // feasible: phi(A x) <= threshold
  double value = 0.0;        // c . x at x
  double upper_bound = 0.0;  // certified bound on the maximum
  int solves = 0;
  bool converged = false;
};

// Maximizes c . x over {x in simplex : phi(A x) <= threshold} by a search
// over the Lagrange multiplier. `feasible_start` must lie in the set.
// With `decide_at` the search stops once the maximum is known to lie above
// or at/below that value.
SublevelResult maximize_linear_on_sublevel(const CompositeProblem& problem, const Vector& c,
                                           double threshold, const Vector& feasible_start,
                                           const OptimizerConfig& config,
                                           std::optional<double> decide_at = std::nullopt);

// Optimizes (num . x) / (den . x), den . x > 0, over the same set by
// Dinkelbach iteration on maximize_linear_on_sublevel.
SublevelResult optimize_ratio_on_sublevel(const CompositeProblem& problem, const Vector& num,
                                          const Vector& den, double threshold,
                                          const Vector& feasible_start, Sense sense,
                                          const OptimizerConfig& config);

}  // namespace plausmeans

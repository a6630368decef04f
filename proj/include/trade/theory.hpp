#pragma once

#include <optional>

#include "trade/core.hpp"

namespace trade::theory {

enum class ExponentForm { KMinusN, KMinusOne };

struct KappaOptions {
  ExponentForm exponent = ExponentForm::KMinusN;
  double coefficient = 2.0;  // multiplies n on the right-hand side
  double tol = 1e-12;
};

int shrink_exponent(int n, int k, ExponentForm form = ExponentForm::KMinusN);
// sqrt(1 - 1/(2n)) raised to the shrink exponent.
double kappa_lhs(int n, int k, const KappaOptions& opts = {});
double kappa_rhs(int n, double kappa, const KappaOptions& opts = {});
double solve_kappa(int n, int k, const KappaOptions& opts = {});

double angle_bound(int n, int k, ExponentForm form = ExponentForm::KMinusN);

struct TheoryParams {
  int n = 2;
  int k = 2;
  double d = 1.0;
  double beta = 0.0;
  double lipschitz = 0.0;
  double delta = 0.0;
  double kappa = 1.0;
};

struct EpsilonBound {
  double epsilon = 0.0;
  // The angle bound carries no information (at least pi/2); epsilon then
  // falls back to delta * L.
  bool vacuous = false;
};

EpsilonBound epsilon_bounds(const TheoryParams& p, int which_case);

struct ParetoResult {
  bool certified = true;
  std::optional<Vec> witness;
  double witness_offering = 0.0;
  double witness_responding = 0.0;
  long long points_checked = 0;
};

struct GridTooLarge : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Exhaustive search for a feasible grid trade improving both agents by more than eps.
ParetoResult pareto_certify(const AgentState& s_a, const AgentState& s_b, const Utility& f_a, const Utility& f_b,
                            double eps, const OfferLimits& limits, double grid_step = 1.0,
                            long long max_points = 10'000'000);

double smoothness_constant(const QuadraticUtility& f);

}  // namespace trade::theory

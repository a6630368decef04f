#include "trade/theory.hpp"

#include <cmath>
#include <limits>

namespace trade::theory {

int shrink_exponent(int n, int k, ExponentForm form) {
  if (n < 2) throw DomainError("theory: n must be at least 2");
  const int lead = form == ExponentForm::KMinusN ? n : 1;
  if (k < lead) throw DomainError("theory: too few rejected offers for the bound");
  return (k - lead) / (n - 1);
}

double kappa_lhs(int n, int k, const KappaOptions& opts) {
  return std::pow(std::sqrt(1.0 - 1.0 / (2.0 * n)), shrink_exponent(n, k, opts.exponent));
}

double kappa_rhs(int n, double kappa, const KappaOptions& opts) {
  const double m = n - 1.0;
  const double k2 = kappa * kappa;
  const double ratio = (k2 - m) / (k2 + m);
  return opts.coefficient * n * std::sqrt(std::max(0.0, 1.0 - ratio * ratio));
}

double solve_kappa(int n, int k, const KappaOptions& opts) {
  const double lhs = kappa_lhs(n, k, opts);
  double lo = std::sqrt(n - 1.0);
  if (kappa_rhs(n, lo, opts) <= lhs) return lo;
  double hi = 2.0 * lo;
  while (kappa_rhs(n, hi, opts) > lhs) hi *= 2.0;
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double r = kappa_rhs(n, mid, opts);
    if (std::abs(r - lhs) <= opts.tol) return mid;
    (r > lhs ? lo : hi) = mid;
    if (hi - lo <= std::numeric_limits<double>::epsilon() * hi) break;
  }
  return 0.5 * (lo + hi);
}

double angle_bound(int n, int k, ExponentForm form) {
  const double base = std::sqrt(1.0 - 1.0 / (2.0 * n));
  return 2.0 * std::asin(std::pow(base, shrink_exponent(n, k, form)));
}

EpsilonBound epsilon_bounds(const TheoryParams& p, int which_case) {
  if (which_case == 1) {
    const double bound = angle_bound(p.n, p.k);
    if (bound >= kHalfPi) return {p.delta * p.lipschitz, true};
    return {p.delta * p.lipschitz * std::sin(bound), false};
  }
  if (which_case == 2) return {p.d * p.kappa * std::sqrt(static_cast<double>(p.n)) * p.beta * p.delta, false};
  throw DomainError("epsilon_bounds: case must be 1 or 2");
}

ParetoResult pareto_certify(const AgentState& s_a, const AgentState& s_b, const Utility& f_a, const Utility& f_b,
                            double eps, const OfferLimits& limits, double grid_step, long long max_points) {
  if (!(grid_step > 0.0)) throw DomainError("pareto_certify: grid step must be positive");
  const int n = s_a.dim();
  double reach = limits.norm_cap;
  if (limits.per_category_cap) reach = std::min(reach, *limits.per_category_cap);
  std::vector<long long> lo(n), hi(n);
  long double total = 1.0;
  for (int i = 0; i < n; ++i) {
    lo[i] = static_cast<long long>(std::ceil(std::max(-reach, -s_a[i]) / grid_step - 1e-9));
    hi[i] = static_cast<long long>(std::floor(std::min(reach, s_b[i]) / grid_step + 1e-9));
    total *= static_cast<long double>(hi[i] - lo[i] + 1);
  }
  if (total > static_cast<long double>(max_points))
    throw GridTooLarge("pareto_certify: grid of " + std::to_string(static_cast<double>(total)) + " points exceeds the limit");
  ParetoResult out;
  const double fa0 = f_a.value(s_a.resources());
  const double fb0 = f_b.value(s_b.resources());
  std::vector<long long> z(lo);
  Vec t(n);
  for (;;) {
    for (int i = 0; i < n; ++i) t[i] = static_cast<double>(z[i]) * grid_step;
    ++out.points_checked;
    if (is_feasible(s_a, s_b, TradeOffer(t), limits)) {
      const double ga = f_a.value(s_a.resources() + t) - fa0;
      const double gb = f_b.value(s_b.resources() - t) - fb0;
      if (ga > eps && gb > eps && (!out.witness || std::min(ga, gb) > std::min(out.witness_offering, out.witness_responding))) {
        out.certified = false;
        out.witness = t;
        out.witness_offering = ga;
        out.witness_responding = gb;
      }
    }
    int i = n - 1;
    while (i >= 0 && z[i] >= hi[i]) {
      z[i] = lo[i];
      --i;
    }
    if (i < 0) break;
    ++z[i];
  }
  return out;
}

double smoothness_constant(const QuadraticUtility& f) { return 2.0 * spectral_radius_symmetric(f.q()); }

}  // namespace trade::theory

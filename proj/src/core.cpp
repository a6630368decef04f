#include "trade/core.hpp"

#include <cmath>

namespace trade {

namespace {

void check_dim(int a, int b, const char* what) {
  if (a != b) throw DomainError(std::string(what) + ": dimension mismatch");
}

}  // namespace

AgentState::AgentState(Vec resources) : resources_(std::move(resources)) {
  require_finite(resources_, "agent state");
  if ((resources_.array() < 0.0).any()) throw DomainError("agent state has a negative resource");
}

TradeOffer::TradeOffer(Vec delta, bool discrete) : delta_(std::move(delta)), discrete_(discrete) {
  require_finite(delta_, "trade offer");
  if (!discrete_) return;
  const Vec rounded = delta_.array().round().matrix();
  if (delta_.size() > 0 && (delta_ - rounded).cwiseAbs().maxCoeff() > 1e-9)
    throw DomainError("discrete offer has a non-integer component");
  delta_ = rounded;
}

QuadraticUtility::QuadraticUtility(Mat q, Vec u) : q_(std::move(q)), u_(std::move(u)) {
  if (q_.rows() != q_.cols() || q_.rows() != u_.size()) throw DomainError("quadratic utility: shape mismatch");
  if (!q_.allFinite()) throw DomainError("quadratic utility: non-finite Q");
  require_finite(u_, "quadratic utility u");
  q_ = (0.5 * (q_ + q_.transpose())).eval();
  smoothness_ = 2.0 * spectral_radius_symmetric(q_);
}

QuadraticUtility QuadraticUtility::linear(Vec u) {
  const auto n = u.size();
  return QuadraticUtility(Mat::Zero(n, n), std::move(u));
}

QuadraticUtility QuadraticUtility::target(const Vec& b) {
  const auto n = b.size();
  return QuadraticUtility(-Mat::Identity(n, n), b);
}

double QuadraticUtility::value(const Vec& s) const {
  check_dim(static_cast<int>(s.size()), dim(), "utility_eval");
  return s.dot(q_ * s) + 2.0 * s.dot(u_);
}

Vec QuadraticUtility::gradient(const Vec& s) const {
  check_dim(static_cast<int>(s.size()), dim(), "utility_gradient");
  return 2.0 * (q_ * s + u_);
}

void OfferLimits::validate() const {
  if (!(norm_cap > 0.0)) throw DomainError("norm cap must be positive");
  if (per_category_cap && !(*per_category_cap > 0.0)) throw DomainError("per-category cap must be positive");
}

double utility_eval(const Utility& f, const AgentState& s) { return f.value(s.resources()); }

Vec utility_gradient(const Utility& f, const AgentState& s) { return f.gradient(s.resources()); }

double benefit(const Utility& f, const AgentState& s, const TradeOffer& t, Side side) {
  check_dim(s.dim(), t.dim(), "benefit");
  const Vec after = side == Side::Offering ? Vec(s.resources() + t.delta()) : Vec(s.resources() - t.delta());
  if ((after.array() < 0.0).any()) throw InfeasibleTrade("benefit: post-trade state has a negative resource");
  return f.value(after) - f.value(s.resources());
}

Response respond(const Utility& f_b, const AgentState& s_b, const TradeOffer& t) {
  check_dim(s_b.dim(), t.dim(), "respond");
  if (((s_b.resources() - t.delta()).array() < 0.0).any()) return Response::Reject;
  return benefit(f_b, s_b, t, Side::Responding) >= 0.0 ? Response::Accept : Response::Reject;
}

bool resources_allow(const AgentState& s_a, const AgentState& s_b, const Vec& t) {
  return ((s_a.resources() + t).array() >= 0.0).all() && ((s_b.resources() - t).array() >= 0.0).all();
}

bool is_feasible(const AgentState& s_a, const AgentState& s_b, const TradeOffer& t, const OfferLimits& limits) {
  check_dim(s_a.dim(), t.dim(), "is_feasible");
  check_dim(s_b.dim(), t.dim(), "is_feasible");
  if (!resources_allow(s_a, s_b, t.delta())) return false;
  if (t.norm() > limits.norm_cap * (1.0 + 1e-12)) return false;
  if (limits.per_category_cap && t.delta().cwiseAbs().maxCoeff() > *limits.per_category_cap * (1.0 + 1e-12))
    return false;
  return true;
}

std::pair<AgentState, AgentState> apply_trade(const AgentState& s_a, const AgentState& s_b, const TradeOffer& t) {
  check_dim(s_a.dim(), t.dim(), "apply_trade");
  check_dim(s_b.dim(), t.dim(), "apply_trade");
  if (!resources_allow(s_a, s_b, t.delta())) throw InfeasibleTrade("apply_trade: negative post-trade resource");
  return {AgentState(s_a.resources() + t.delta()), AgentState(s_b.resources() - t.delta())};
}

std::vector<int> active_categories(const AgentState& s_a, const AgentState& s_b) {
  check_dim(s_a.dim(), s_b.dim(), "active_categories");
  std::vector<int> out;
  for (int i = 0; i < s_a.dim(); ++i)
    if (s_a[i] > 0.0 && s_b[i] > 0.0) out.push_back(i);
  return out;
}

}  // namespace trade

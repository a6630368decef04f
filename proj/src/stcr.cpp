#include "trade/stcr.hpp"

#include <cmath>
#include <numeric>

#include "trade/rounding.hpp"

namespace trade {

void NegotiationParams::validate() const {
  if (offer_budget < 1) throw DomainError("offer budget must be at least 1");
  if (!(angle_threshold > 0.0)) throw DomainError("angle threshold must be positive");
  if (!(cone_expansion_rate >= 0.0)) throw DomainError("cone expansion rate must be nonnegative");
  if (!(halving_floor > 0.0 && halving_floor < 1.0)) throw DomainError("halving floor must lie in (0, 1)");
  if (!(expansion_factor > 1.0)) throw DomainError("expansion factor must exceed 1");
}

std::optional<Vec> ensure_beneficial(const MarketView& view, const Vec& t, const NegotiationParams& params) {
  if (t.isZero(0.0)) return std::nullopt;
  if (t.dot(view.gradient()) < 0.0) return std::nullopt;
  if (view.offering_benefit(t) >= 0.0) return t;
  const double d = view.limits().norm_cap;
  if (!view.discrete()) {
    Vec cur = t;
    for (;;) {
      cur /= 2.0;
      if (cur.norm() < params.halving_floor * d) return std::nullopt;
      if (view.offering_benefit(cur) >= 0.0) return cur;
    }
  }
  long g = 0;
  for (int i = 0; i < t.size(); ++i) g = std::gcd(g, std::labs(std::lround(t[i])));
  if (g == 0) return std::nullopt;
  const Vec primitive = t / static_cast<double>(g);
  for (long k = g - 1; k >= 1; --k) {
    const Vec cand = primitive * static_cast<double>(k);
    if (view.offering_benefit(cand) >= 0.0) return cand;
  }
  const double loss = -view.offering_benefit(primitive);
  const double bound = view.f_a().smoothness() * d * d / 2.0;
  if (loss <= bound) return primitive;
  return std::nullopt;
}

std::optional<Vec> stage1_heuristic(const MarketView& view, const Vec& prev_full, const NegotiationParams& params) {
  (void)params;
  if (!view.supported(prev_full)) return std::nullopt;
  const Vec t = view.restrict(prev_full);
  if (t.isZero(0.0) || !view.feasible(t)) return std::nullopt;
  if (t.dot(view.gradient()) < 0.0 || view.offering_benefit(t) < 0.0) return std::nullopt;
  return t;
}

std::optional<Vec> quadrant_probe(const MarketView& view, int axis, const NegotiationParams& params) {
  const Vec g = view.gradient();
  const Vec dir = Vec::Unit(view.dim(), axis) * (g[axis] >= 0.0 ? 1.0 : -1.0);
  const double d = view.limits().norm_cap;
  double s = view.max_scale(dir, d);
  if (view.discrete()) {
    s = std::floor(s + 1e-9);
    if (s < 1.0) return std::nullopt;
  } else if (s < params.min_magnitude * d) {
    return std::nullopt;
  }
  return ensure_beneficial(view, dir * s, params);
}

GradientCone quadrant_cone(const Vec& quadrant) {
  const double n = quadrant.norm();
  if (n == 0.0) throw DegeneracyError("quadrant vector is zero");
  return GradientCone(quadrant / n, kHalfPi);
}

GradientCone refine_cone(const GradientCone& cone, const std::vector<Vec>& batch) {
  const int n = cone.dim();
  if (static_cast<int>(batch.size()) != n - 1) throw DomainError("refine_cone: batch must hold n-1 offers");
  const Vec& tau = cone.direction();
  std::vector<Vec> units;
  for (const Vec& b : batch) {
    const double nb = b.norm();
    if (nb == 0.0) throw DomainError("refine_cone: zero batch offer");
    units.push_back(b / nb);
  }
  for (std::size_t i = 0; i < units.size(); ++i) {
    if (std::abs(units[i].dot(tau)) > 1e-6) throw DomainError("refine_cone: batch offer not orthogonal to the cone axis");
    for (std::size_t j = i + 1; j < units.size(); ++j)
      if (std::abs(units[i].dot(units[j])) > 1e-6) throw DomainError("refine_cone: batch offers not mutually orthogonal");
  }
  const double c = std::cos(cone.angle());
  const double s = std::sin(cone.angle());
  Vec sum = tau;
  for (const Vec& u : units) sum += tau * c + u * s;
  const double shrink = std::sqrt(1.0 - 1.0 / (2.0 * n));
  return GradientCone(sum.normalized(), std::asin(s * shrink));
}

void incorporate_counteroffer(RefinementState& state, const Vec& counter) {
  if (counter.isZero(0.0)) return;
  state.extra_constraints.push_back(Halfspace{-counter, 0.0});
}

std::optional<GradientCone> warm_start_cone(const GradientCone& prev, const Vec& accepted, double b) {
  const double theta = prev.angle() + b * accepted.norm();
  if (theta > kHalfPi) return std::nullopt;
  return GradientCone(prev.direction(), theta);
}

GradientCone mirror_into_constraints(const GradientCone& cone, const std::vector<Halfspace>& constraints) {
  Vec tau = cone.direction();
  for (const auto& h : constraints) {
    const double hn = h.normal.squaredNorm();
    const double side = h.normal.dot(tau);
    if (hn == 0.0 || side >= 0.0) continue;
    tau -= 2.0 * side / hn * h.normal;
    tau.normalize();
  }
  return GradientCone(tau, cone.angle());
}

std::optional<Vec> generate_orthogonal_offer(const MarketView& view, RefinementState& state,
                                             const NegotiationParams& params) {
  if (!state.cone) throw std::logic_error("generate_orthogonal_offer: no cone");
  const int n = view.dim();
  std::vector<Vec> fixed{state.cone->direction()};
  for (const Vec& b : state.batch) fixed.push_back(b);
  if (static_cast<int>(fixed.size()) >= n) return std::nullopt;
  std::vector<Vec> complement;
  try {
    complement = orthonormal_extension(fixed, n);
  } catch (const DegeneracyError&) {
    return std::nullopt;
  }
  const Vec g = view.gradient();
  Vec proj = Vec::Zero(n);
  for (const Vec& c : complement) proj += c.dot(g) * c;
  std::vector<Vec> candidates;
  if (proj.norm() > 1e-12 * std::max(1.0, g.norm())) {
    // Rotate the complement basis so every direction makes the same positive
    // angle with the projected gradient. Leading with the projection itself
    // would leave the last direction orthogonal to the gradient.
    std::vector<Vec> basis{proj.normalized()};
    fixed.push_back(basis.front());
    if (static_cast<int>(fixed.size()) < n)
      for (Vec& c : orthonormal_extension(fixed, n)) basis.push_back(std::move(c));
    const int m = static_cast<int>(basis.size());
    Vec h = -Vec::Constant(m, 1.0 / std::sqrt(static_cast<double>(m)));
    h[0] += 1.0;
    const double hn = h.squaredNorm();
    for (int j = 0; j < m; ++j) {
      Vec dir = basis[static_cast<std::size_t>(j)];
      if (hn > 1e-24) {
        dir.setZero();
        for (int i = 0; i < m; ++i) {
          const double hij = (i == j ? 1.0 : 0.0) - 2.0 * h[i] * h[j] / hn;
          dir += hij * basis[static_cast<std::size_t>(i)];
        }
      }
      candidates.push_back(dir.normalized());
    }
  } else {
    candidates = complement;
  }
  const double d = view.limits().norm_cap;
  for (Vec dir : candidates) {
    if (dir.dot(g) < 0.0) dir = -dir;
    bool skip = false;
    for (const Vec& e : state.excluded)
      if (std::abs(e.dot(dir)) > 1.0 - 1e-9) skip = true;
    if (skip) continue;
    std::optional<Vec> t;
    if (view.discrete()) {
      t = round_min_angle(view, dir * d, d, [&](const Vec& z) { return z.dot(g) >= 0.0; });
    } else {
      const double s = view.max_scale(dir, d);
      if (s >= params.min_magnitude * d) t = dir * s;
    }
    if (!t) continue;
    if (auto safe = ensure_beneficial(view, *t, params)) return safe;
    state.excluded.push_back(dir);
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------

StcrPolicy::StcrPolicy(NegotiationParams params) : params_(params) { params_.validate(); }

void StcrPolicy::reset_for(const MarketView& view) {
  active_ = view.active();
  state_ = RefinementState{};
  phase_ = Phase::Heuristic;
  quadrant_axis_ = 0;
  last_diag_.reset();
}

void StcrPolicy::set_cone(const MarketView& view, ConeEvent kind, const GradientCone& next) {
  (void)view;
  ConeUpdate u;
  u.kind = kind;
  u.active = active_;
  if (state_.cone) {
    u.tau_before = state_.cone->direction();
    u.theta_before = state_.cone->angle();
  }
  u.tau_after = next.direction();
  u.theta_after = next.angle();
  log_cone(std::move(u));
  state_.cone = next;
}

Proposal StcrPolicy::emit(const MarketView& view, Vec offer, Stage stage) {
  last_stage_ = stage;
  Proposal p;
  p.offer = std::move(offer);
  p.stage = stage;
  if (state_.cone) p.cone = ConeSnapshot{cone_full(view, state_.cone->direction()), state_.cone->angle()};
  p.discrete = last_diag_;
  last_diag_.reset();
  return p;
}

Proposal StcrPolicy::finish(TerminalReason reason) {
  Proposal p;
  p.reason = reason;
  return p;
}

Proposal StcrPolicy::propose(const MarketView& view) {
  if (view.active() != active_) reset_for(view);
  const int n = view.dim();
  for (;;) {
    switch (phase_) {
      case Phase::Heuristic:
        if (params_.use_prev_trade_heuristic && prev_full_)
          if (auto t = stage1_heuristic(view, *prev_full_, params_)) return emit(view, std::move(*t), Stage::Heuristic);
        phase_ = Phase::EnterRefine;
        break;
      case Phase::EnterRefine:
        state_.batch.clear();
        if (params_.use_cone_warm_start && state_.cone) {
          phase_ = Phase::Refine;
        } else {
          state_.cone.reset();
          state_.quadrant = Vec::Zero(n);
          quadrant_axis_ = 0;
          phase_ = Phase::Quadrant;
        }
        break;
      case Phase::Quadrant: {
        while (quadrant_axis_ < n) {
          if (auto t = quadrant_probe(view, quadrant_axis_, params_)) return emit(view, std::move(*t), Stage::Quadrant);
          state_.quadrant[quadrant_axis_] = 0.0;
          ++quadrant_axis_;
        }
        if (state_.quadrant.isZero(0.0)) return finish(TerminalReason::NoFeasibleOffer);
        GradientCone cone = quadrant_cone(state_.quadrant);
        if (view.discrete()) {
          // Integer refinement needs a finite chart; the probed orthant fits
          // inside the cone about its diagonal when every axis was probed.
          const bool full = (state_.quadrant.array() != 0.0).all();
          const Vec axis = full ? Vec(state_.quadrant.cwiseSign() / std::sqrt(static_cast<double>(n))) : cone.direction();
          cone = GradientCone(axis, full ? std::acos(1.0 / std::sqrt(static_cast<double>(n))) : kHalfPi - 0.05);
        }
        set_cone(view, ConeEvent::QuadrantInit, cone);
        state_.batch.clear();
        phase_ = Phase::Refine;
        break;
      }
      case Phase::Refine: {
        auto p = view.discrete() ? refine_discrete(view) : refine_continuous(view);
        if (p) return *p;
        break;
      }
    }
  }
}

std::optional<Proposal> StcrPolicy::refine_continuous(const MarketView& view) {
  const int n = view.dim();
  if (n < 2) return finish(TerminalReason::NoFeasibleOffer);
  if (static_cast<int>(state_.batch.size()) == n - 1) {
    const GradientCone next = refine_cone(*state_.cone, state_.batch);
    set_cone(view, ConeEvent::Refine, next);
    state_.batch.clear();
    if (!state_.extra_constraints.empty()) {
      const GradientCone filtered = mirror_into_constraints(next, state_.extra_constraints);
      if (!filtered.direction().isApprox(next.direction())) set_cone(view, ConeEvent::CounterMirror, filtered);
    }
  }
  if (state_.cone->angle() < params_.angle_threshold) return finish(TerminalReason::AngleThreshold);
  if (auto t = generate_orthogonal_offer(view, state_, params_)) return emit(view, std::move(*t), Stage::Orthogonal);
  return finish(TerminalReason::NoFeasibleOffer);
}

std::optional<Proposal> StcrPolicy::refine_discrete(const MarketView& view) {
  const int n = view.dim();
  if (n < 2) return finish(TerminalReason::NoFeasibleOffer);
  if (state_.cone->angle() < params_.angle_threshold) return finish(TerminalReason::AngleThreshold);
  if (static_cast<int>(state_.batch.size()) < n - 1) {
    if (auto t = generate_orthogonal_offer(view, state_, params_)) return emit(view, std::move(*t), Stage::Orthogonal);
    return finish(TerminalReason::NoFeasibleOffer);
  }
  std::vector<Vec> cuts = state_.batch;
  for (const auto& h : state_.extra_constraints) cuts.push_back(h.normal);
  discrete::StepParams sp;
  sp.expansion_factor = params_.expansion_factor;
  const discrete::StepResult res = discrete::discrete_refine_step(view, *state_.cone, cuts, sp);
  if (observer_) observer_(view, res);
  for (double theta : res.expansions) set_cone(view, ConeEvent::Expansion, GradientCone(state_.cone->direction(), theta));
  using Kind = discrete::StepResult::Kind;
  DiscreteDiagnostics diag;
  diag.corner_count = static_cast<int>(res.corners.size());
  diag.sphere_radius = res.sphere ? res.sphere->radius : 0.0;
  switch (res.kind) {
    case Kind::Reinit: {
      ConeUpdate u;
      u.kind = ConeEvent::Reinit;
      u.active = active_;
      u.tau_before = state_.cone->direction();
      u.theta_before = res.theta_used;
      log_cone(std::move(u));
      state_.cone.reset();
      state_.batch.clear();
      state_.extra_constraints.clear();
      state_.quadrant = Vec::Zero(n);
      quadrant_axis_ = 0;
      phase_ = Phase::Quadrant;
      return std::nullopt;
    }
    case Kind::Adopted:
    case Kind::Collapsed:
      set_cone(view, ConeEvent::DiscreteAdopt, *res.candidate);
      state_.batch.clear();
      state_.extra_constraints.clear();
      diag.adopted = true;
      last_diag_ = diag;
      if (state_.cone->angle() < params_.angle_threshold) return finish(TerminalReason::AngleThreshold);
      if (auto t = generate_orthogonal_offer(view, state_, params_)) return emit(view, std::move(*t), Stage::Orthogonal);
      return finish(TerminalReason::NoFeasibleOffer);
    case Kind::Bisect:
      last_diag_ = diag;
      if (auto t = ensure_beneficial(view, *res.offer, params_)) return emit(view, std::move(*t), Stage::Bisecting);
      return finish(TerminalReason::NoFeasibleOffer);
    case Kind::Stop:
      return finish(TerminalReason::NoFeasibleOffer);
  }
  return finish(TerminalReason::NoFeasibleOffer);
}

void StcrPolicy::accepted(const MarketView& view, const Vec& offer) {
  prev_full_ = view.lift(offer);
  if (state_.cone && params_.use_cone_warm_start) {
    auto next = warm_start_cone(*state_.cone, offer, params_.cone_expansion_rate);
    if (next && view.discrete() && next->angle() >= kHalfPi - 0.05) next.reset();
    if (next) {
      set_cone(view, ConeEvent::WarmStart, *next);
    } else {
      ConeUpdate u;
      u.kind = ConeEvent::Reinit;
      u.active = active_;
      u.tau_before = state_.cone->direction();
      u.theta_before = state_.cone->angle();
      log_cone(std::move(u));
      state_.cone.reset();
    }
  } else {
    state_.cone.reset();
  }
  state_.batch.clear();
  state_.extra_constraints.clear();
  state_.excluded.clear();
  phase_ = params_.use_prev_trade_heuristic ? Phase::Heuristic : Phase::EnterRefine;
}

void StcrPolicy::observe(const MarketView& view, const Vec& offer, Response r) {
  ++state_.offers_made;
  if (view.active() != active_) return;
  if (r == Response::Accept) {
    accepted(view, offer);
    return;
  }
  switch (last_stage_) {
    case Stage::Heuristic:
      phase_ = Phase::EnterRefine;
      break;
    case Stage::Quadrant:
      state_.quadrant[quadrant_axis_] = offer[quadrant_axis_];
      ++quadrant_axis_;
      break;
    case Stage::Orthogonal:
    case Stage::Bisecting:
      state_.batch.push_back(offer);
      break;
    default:
      break;
  }
}

void StcrPolicy::observe_external(const MarketView& view, const Vec& offer, Response r) {
  ++state_.offers_made;
  if (r == Response::Accept && view.active() == active_) accepted(view, offer);
}

void StcrPolicy::counteroffer(const MarketView& view, const Vec& counter) {
  if (view.active() != active_) return;
  incorporate_counteroffer(state_, counter);
}

}  // namespace trade

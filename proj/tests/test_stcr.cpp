#include <cmath>
#include <memory>
#include <random>

#include "doctest.h"
#include "trade/stcr.hpp"

using namespace trade;

namespace {

Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }
Vec v3(double a, double b, double c) { return (Vec(3) << a, b, c).finished(); }

std::shared_ptr<const QuadraticUtility> share(QuadraticUtility f) {
  return std::make_shared<const QuadraticUtility>(std::move(f));
}

Vec random_unit(std::mt19937_64& rng, int n) {
  std::normal_distribution<double> nd;
  Vec v(n);
  do {
    for (int i = 0; i < n; ++i) v[i] = nd(rng);
  } while (v.norm() == 0.0);
  return v.normalized();
}

QuadraticUtility random_quadratic(std::mt19937_64& rng, int n) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> lin(1, 200);
  Mat m(n, n);
  for (int r = 0; r < n; ++r)
    for (int c = 0; c < n; ++c) m(r, c) = unit(rng);
  Vec u(n);
  for (int i = 0; i < n; ++i) u[i] = lin(rng);
  return QuadraticUtility(-(m * m.transpose()), u);
}

// Direction inside `cone` that also lies on the nonnegative side of every cut.
std::optional<Vec> sample_cut_cone(std::mt19937_64& rng, const GradientCone& cone, const std::vector<Vec>& cuts) {
  std::uniform_real_distribution<double> ang(0.0, cone.angle());
  for (int attempt = 0; attempt < 1000; ++attempt) {
    const int n = cone.dim();
    Vec w = random_unit(rng, n);
    w -= w.dot(cone.direction()) * cone.direction();
    if (w.norm() < 1e-9) continue;
    const Vec g = rotate_towards(cone.direction(), w.normalized(), ang(rng));
    bool ok = true;
    for (const Vec& c : cuts) ok = ok && c.dot(g) >= 0.0;
    if (ok) return g;
  }
  return std::nullopt;
}

}  // namespace

TEST_CASE("refine_cone closed-form two-dimensional case") {
  const GradientCone start(v2(0, 1), kHalfPi);
  const GradientCone first = refine_cone(start, {v2(5, 0)});
  CHECK((first.direction() - v2(1, 1) / std::sqrt(2.0)).norm() <= 1e-12);
  CHECK(first.angle() == doctest::Approx(kPi / 3).epsilon(1e-12));

  const GradientCone second = refine_cone(GradientCone(v2(0, 1), kPi / 3), {v2(5, 0)});
  CHECK(second.angle() == doctest::Approx(std::asin(0.75)).epsilon(1e-12));
  CHECK(second.angle() == doctest::Approx(0.8481).epsilon(1e-4));
}

TEST_CASE("refine_cone rejects malformed batches") {
  const GradientCone c(v3(1, 0, 0), 1.0);
  CHECK_THROWS_AS(refine_cone(c, {v3(0, 1, 0)}), DomainError);
  CHECK_THROWS_AS(refine_cone(c, {v3(0, 1, 0), v3(0, 1, 1)}), DomainError);
  CHECK_THROWS_AS(refine_cone(c, {v3(1, 1, 0), v3(0, 0, 1)}), DomainError);
  CHECK_NOTHROW(refine_cone(c, {v3(0, 2, 0), v3(0, 0, -3)}));
}

TEST_CASE("refine_cone shrinkage ratio and enclosure of the cut cone") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> theta(0.05, kHalfPi);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + trial % 5;
    const Vec tau = random_unit(rng, n);
    const GradientCone cone(tau, theta(rng));
    auto batch = orthonormal_extension({tau}, n);
    for (auto& b : batch)
      if (rng() & 1) b = -b;
    const GradientCone next = refine_cone(cone, batch);
    CHECK(std::abs(std::sin(next.angle()) / std::sin(cone.angle()) - std::sqrt(1.0 - 1.0 / (2.0 * n))) <= 1e-12);
    // Brute-force oracle: sampled directions of the cut cone stay inside the refined cone.
    for (int s = 0; s < 50; ++s) {
      const auto g = sample_cut_cone(rng, cone, batch);
      if (!g) continue;
      CHECK(angle_between(*g, next.direction()) <= next.angle() + 1e-9);
    }
  }
}

TEST_CASE("warm_start_cone") {
  const GradientCone c(v3(1, 0, 0), 1.0);
  const auto same = warm_start_cone(c, v3(0, 5, 0), 0.0);
  REQUIRE(same);
  CHECK(same->angle() == 1.0);
  const auto wider = warm_start_cone(c, v3(5, 5, 5) * (8.66 / (5 * std::sqrt(3.0))), 0.01);
  REQUIRE(wider);
  CHECK(wider->angle() == doctest::Approx(1.0866).epsilon(1e-9));
  CHECK((wider->direction() - c.direction()).norm() == 0.0);
  CHECK_FALSE(warm_start_cone(GradientCone(v3(1, 0, 0), 1.5), v3(5, 0, 0), 0.1));
}

TEST_CASE("generate_orthogonal_offer examples") {
  const auto f = QuadraticUtility::linear(v2(0.5, 0));  // gradient (1, 0)
  const AgentState rich2(v2(100, 100));
  const OfferLimits limits{5.0, std::nullopt};
  const MarketView view(rich2, rich2, f, limits, Mode::Continuous);
  RefinementState st;
  st.cone = GradientCone(v2(1, 1).normalized(), kHalfPi);
  const auto t = generate_orthogonal_offer(view, st, NegotiationParams{});
  REQUIRE(t);
  CHECK((*t - v2(1, -1).normalized() * 5.0).norm() <= 1e-12);

  const auto g3 = QuadraticUtility::linear(v3(0, 0, -1));
  const AgentState rich3(v3(100, 100, 100));
  const MarketView view3(rich3, rich3, g3, limits, Mode::Continuous);
  RefinementState st3;
  st3.cone = GradientCone(v3(1, 0, 0), 1.0);
  st3.batch = {v3(0, 5, 0)};
  const auto t3 = generate_orthogonal_offer(view3, st3, NegotiationParams{});
  REQUIRE(t3);
  CHECK((*t3 - v3(0, 0, -5)).norm() <= 1e-12);

  st3.batch.push_back(v3(0, 0, 5));
  CHECK_FALSE(generate_orthogonal_offer(view3, st3, NegotiationParams{}));
}

TEST_CASE("generate_orthogonal_offer property: orthogonal, beneficial, feasible") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 200; ++trial) {
    const int n = 2 + trial % 4;
    const auto f = random_quadratic(rng, n);
    std::uniform_real_distribution<double> pos(20.0, 120.0);
    Vec sa(n), sb(n);
    for (int i = 0; i < n; ++i) {
      sa[i] = pos(rng);
      sb[i] = pos(rng);
    }
    const OfferLimits limits{5.0 * std::sqrt(static_cast<double>(n)), 5.0};
    const MarketView view(AgentState(sa), AgentState(sb), f, limits, Mode::Continuous);
    RefinementState st;
    st.cone = GradientCone(random_unit(rng, n), 1.0);
    const int k = static_cast<int>(rng() % static_cast<unsigned>(n - 1));
    for (const Vec& b : orthonormal_extension({st.cone->direction()}, n))
      if (static_cast<int>(st.batch.size()) < k) st.batch.push_back(b * 3.0);
    const auto t = generate_orthogonal_offer(view, st, NegotiationParams{});
    if (!t) continue;
    const double d = limits.norm_cap;
    CHECK(std::abs(t->dot(st.cone->direction())) <= 1e-6 * d);
    for (const Vec& b : st.batch) CHECK(std::abs(t->dot(b.normalized())) <= 1e-6 * d);
    CHECK(t->dot(view.gradient()) >= 0.0);
    CHECK(view.feasible(*t));
    CHECK(view.offering_benefit(*t) >= 0.0);
  }
}

TEST_CASE("ensure_beneficial halves overshooting offers") {
  Mat q(1, 1);
  q << -1;
  Vec u(1);
  u << 1;
  const QuadraticUtility f(q, u);  // -(x - 1)^2 up to a constant
  Vec sa(1), sb(1), t(1);
  sa << 0.9;
  sb << 100;
  t << 0.5;
  const OfferLimits limits{0.5, std::nullopt};
  const MarketView view(AgentState(sa), AgentState(sb), f, limits, Mode::Continuous);
  const auto out = ensure_beneficial(view, t, NegotiationParams{});
  REQUIRE(out);
  // Oracle: walk the halvings directly.
  Vec expect = t;
  while (f.value(sa + expect) - f.value(sa) < 0.0) expect /= 2.0;
  CHECK((*out - expect).norm() == 0.0);
  CHECK((*out)[0] == 0.125);

  const auto lin = QuadraticUtility::linear(v2(1, 1));
  const MarketView lview(AgentState(v2(50, 50)), AgentState(v2(50, 50)), lin, OfferLimits{5.0, std::nullopt},
                         Mode::Continuous);
  CHECK(*ensure_beneficial(lview, v2(3, 4), NegotiationParams{}) == v2(3, 4));
  CHECK_FALSE(ensure_beneficial(lview, v2(-3, -4), NegotiationParams{}));

  const auto tgt = QuadraticUtility::target(v2(50, 50));
  const MarketView at_opt(AgentState(v2(50, 50)), AgentState(v2(50, 50)), tgt, OfferLimits{5.0, std::nullopt},
                          Mode::Continuous);
  CHECK_FALSE(ensure_beneficial(at_opt, v2(3, 4), NegotiationParams{}));
}

TEST_CASE("ensure_beneficial in integer mode shrinks to a multiple or accepts a bounded loss") {
  const auto tgt = QuadraticUtility::target(v2(51, 50));
  const OfferLimits limits{5.0, std::nullopt};
  const MarketView view(AgentState(v2(50, 50)), AgentState(v2(50, 50)), tgt, limits, Mode::Discrete);
  CHECK(*ensure_beneficial(view, v2(4, 0), NegotiationParams{}) == v2(2, 0));
  const auto out = ensure_beneficial(view, v2(2, 2), NegotiationParams{});
  REQUIRE(out);
  CHECK(*out == v2(1, 1));
  CHECK(-view.offering_benefit(*out) <= tgt.smoothness() * 25.0 / 2.0);
}

TEST_CASE("stage1_heuristic re-offers only feasible beneficial trades") {
  const auto f = QuadraticUtility::linear(v2(1, 0));
  const OfferLimits limits{5.0, std::nullopt};
  const MarketView rich(AgentState(v2(50, 50)), AgentState(v2(50, 50)), f, limits, Mode::Continuous);
  CHECK(*stage1_heuristic(rich, v2(3, -1), NegotiationParams{}) == v2(3, -1));
  CHECK_FALSE(stage1_heuristic(rich, v2(-3, 1), NegotiationParams{}));
  const MarketView poor(AgentState(v2(50, 50)), AgentState(v2(1, 50)), f, limits, Mode::Continuous);
  CHECK_FALSE(stage1_heuristic(poor, v2(3, -1), NegotiationParams{}));
}

TEST_CASE("quadrant probes follow the gradient sign") {
  const auto f = QuadraticUtility::linear(v3(1, -1, 0));
  const OfferLimits limits{5.0, std::nullopt};
  const AgentState s(v3(50, 50, 50));
  const MarketView view(s, s, f, limits, Mode::Continuous);
  CHECK(*quadrant_probe(view, 0, NegotiationParams{}) == v3(5, 0, 0));
  CHECK(*quadrant_probe(view, 1, NegotiationParams{}) == v3(0, -5, 0));
  CHECK(*quadrant_probe(view, 2, NegotiationParams{}) == v3(0, 0, 5));  // zero gradient: +
  const GradientCone c = quadrant_cone(v2(5, 5));
  CHECK((c.direction() - v2(1, 1) / std::sqrt(2.0)).norm() <= 1e-15);
  CHECK(c.angle() == kHalfPi);
}

TEST_CASE("counteroffers become halfspace constraints") {
  RefinementState st;
  incorporate_counteroffer(st, v3(-10, 5, 0));
  REQUIRE(st.extra_constraints.size() == 1);
  CHECK(st.extra_constraints[0].normal == v3(10, -5, 0));
  CHECK(st.extra_constraints[0].offset == 0.0);
  incorporate_counteroffer(st, Vec::Zero(3));
  CHECK(st.extra_constraints.size() == 1);

  const GradientCone c(v2(1, 0), 0.3);
  const GradientCone m = mirror_into_constraints(c, {Halfspace{v2(-1, 1), 0.0}});
  CHECK((m.direction() - v2(0, 1)).norm() <= 1e-12);
  CHECK(m.angle() == 0.3);
  const GradientCone kept = mirror_into_constraints(c, {Halfspace{v2(1, 0), 0.0}});
  CHECK(kept.direction() == c.direction());
}

TEST_CASE("fully conflicting and fully compatible linear utilities") {
  const AgentState s(v3(50, 50, 50));
  const OfferLimits limits{5 * std::sqrt(3.0), 5.0};
  const auto f_a = share(QuadraticUtility::linear(v3(1, 1, 1)));

  SUBCASE("identical utilities: only zero-gain offers are accepted") {
    const auto t = run_negotiation(s, s, f_a, limits, Mode::Continuous, std::make_unique<StcrPolicy>(), greedy_responder(f_a),
                                   100);
    for (const auto& e : t.events)
      if (e.response == Response::Accept) CHECK(std::abs(f_a->value(e.s_a + e.offer) - f_a->value(e.s_a)) <= 1e-9);
    CHECK(t.terminal != TerminalReason::None);
  }
  SUBCASE("opposite utilities: the first offer is accepted") {
    const auto f_b = share(QuadraticUtility::linear(v3(-1, -1, -1)));
    const auto t = run_negotiation(s, s, f_a, limits, Mode::Continuous, std::make_unique<StcrPolicy>(), greedy_responder(f_b),
                                   100);
    REQUIRE_FALSE(t.events.empty());
    const auto& first = t.events.front();
    CHECK(first.response == Response::Accept);
    CHECK(f_b->value(first.s_b - first.offer) - f_b->value(first.s_b) >= 0.0);
    CHECK(t.accepted_count() > 10);
  }
}

TEST_CASE("transcript invariants over random quadratic scenarios") {
  std::mt19937_64 rng(77);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 2 + trial % 4;
    const Mode mode = (trial % 2 == 0) ? Mode::Continuous : Mode::Discrete;
    if (mode == Mode::Discrete && n > 4) continue;
    const auto f_a = share(random_quadratic(rng, n));
    const auto f_b = share(random_quadratic(rng, n));
    const AgentState s(Vec::Constant(n, 100.0));
    const OfferLimits limits{5 * std::sqrt(static_cast<double>(n)), 5.0};
    const auto t = run_negotiation(s, s, f_a, limits, mode, std::make_unique<StcrPolicy>(), greedy_responder(f_b), 150,
                                   f_b);
    const double d = limits.norm_cap;
    const double beta = f_a->smoothness();
    double prev_b = f_b->value(s.resources());
    for (const auto& e : t.events) {
      CHECK(e.offer.dot(f_a->gradient(e.s_a)) >= -1e-9);
      CHECK(is_feasible(AgentState(e.s_a), AgentState(e.s_b), TradeOffer(e.offer), limits));
      if (mode == Mode::Discrete) CHECK(e.offer.isApprox(e.offer.array().round().matrix()));
      if (e.response == Response::Accept) {
        CHECK(e.benefit.responding >= 0.0);
        CHECK(e.benefit.offering >= (mode == Mode::Continuous ? -1e-9 : -beta * d * d / 2 - 1e-9));
        const double now_b = f_b->value(e.s_b - e.offer);
        CHECK(now_b >= prev_b - 1e-9);
        prev_b = now_b;
      }
      if (mode == Mode::Continuous && e.stage == Stage::Orthogonal && e.cone)
        CHECK(std::abs(e.offer.dot(e.cone->tau)) <= 1e-6 * d * d);
    }
    for (const auto& u : t.cone_updates) {
      if (u.kind != ConeEvent::Refine) continue;
      const double ratio = std::sin(u.theta_after) / std::sin(u.theta_before);
      CHECK(std::abs(ratio - std::sqrt(1.0 - 1.0 / (2.0 * static_cast<double>(u.active.size())))) <= 1e-12);
    }
  }
}

TEST_CASE("linear responder gradient stays inside every refined cone") {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 60; ++trial) {
    const int n = 2 + trial % 4;
    const auto f_a = share(random_quadratic(rng, n));
    Vec ub(n);
    for (int i = 0; i < n; ++i) ub[i] = std::uniform_real_distribution<double>(-1.0, 1.0)(rng);
    const auto f_b = share(QuadraticUtility::linear(ub));
    const AgentState s(Vec::Constant(n, 100.0));
    const OfferLimits limits{5 * std::sqrt(static_cast<double>(n)), 5.0};
    NegotiationParams params;
    params.use_cone_warm_start = false;
    const auto t = run_negotiation(s, s, f_a, limits, Mode::Continuous, std::make_unique<StcrPolicy>(params),
                                   greedy_responder(f_b), 200);
    for (const auto& u : t.cone_updates) {
      if (u.kind != ConeEvent::Refine && u.kind != ConeEvent::QuadrantInit) continue;
      Vec g(static_cast<int>(u.active.size()));
      for (std::size_t i = 0; i < u.active.size(); ++i) g[static_cast<int>(i)] = ub[u.active[i]];
      if (g.norm() == 0.0) continue;
      CHECK(angle_between(g, u.tau_after) <= u.theta_after + 1e-6);
    }
  }
}

TEST_CASE("NegotiationParams validation") {
  NegotiationParams p;
  CHECK_NOTHROW(p.validate());
  p.offer_budget = 0;
  CHECK_THROWS_AS(p.validate(), DomainError);
  p = {};
  p.angle_threshold = 0.0;
  CHECK_THROWS_AS(p.validate(), DomainError);
  p = {};
  p.cone_expansion_rate = -1.0;
  CHECK_THROWS_AS(StcrPolicy{p}, DomainError);
}

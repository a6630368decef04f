#include <cmath>
#include <random>

#include "doctest.h"
#include "trade/core.hpp"
#include "trade/serialization.hpp"

using namespace trade;

namespace {

Vec v3(double a, double b, double c) { return (Vec(3) << a, b, c).finished(); }
Vec v2(double a, double b) { return (Vec(2) << a, b).finished(); }

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

}  // namespace

TEST_CASE("utility values from the study transcript") {
  const auto human = QuadraticUtility::target(v3(60, 70, 30));
  CHECK(utility_eval(human, AgentState(v3(50, 60, 45))) == 8975.0);
  const auto agent = QuadraticUtility::target(v3(33, 33, 33));
  CHECK(utility_eval(agent, AgentState(v3(50, 50, 50))) == 2400.0);
  const QuadraticUtility zero(Mat::Zero(3, 3), Vec::Zero(3));
  CHECK(utility_eval(zero, AgentState(v3(1, 2, 3))) == 0.0);
  CHECK_THROWS_AS(utility_eval(human, AgentState(v2(1, 2))), DomainError);
}

TEST_CASE("utility gradient") {
  const auto agent = QuadraticUtility::target(v3(33, 33, 33));
  CHECK(utility_gradient(agent, AgentState(v3(50, 50, 50))) == v3(-34, -34, -34));
  const auto lin = QuadraticUtility::linear(v2(1, 2));
  CHECK(utility_gradient(lin, AgentState(v2(7, 3))) == v2(2, 4));
  const Vec b = v3(10, 20, 30);
  CHECK(utility_gradient(QuadraticUtility::target(b), AgentState(b)).isZero(0.0));
}

TEST_CASE("gradient matches central differences on random quadratics") {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> pos(0.0, 150.0);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + trial % 4;
    const auto f = random_quadratic(rng, n);
    Vec s(n);
    for (int i = 0; i < n; ++i) s[i] = pos(rng);
    const Vec g = f.gradient(s);
    const double h = 1e-5;
    for (int i = 0; i < n; ++i) {
      Vec hi = s, lo = s;
      hi[i] += h;
      lo[i] -= h;
      const double fd = (f.value(hi) - f.value(lo)) / (2 * h);
      CHECK(std::abs(fd - g[i]) <= 1e-4 * std::max(1.0, std::abs(g[i])));
    }
  }
}

TEST_CASE("QuadraticUtility symmetrizes and rejects bad shapes") {
  Mat q(2, 2);
  q << -1, 2, 0, -1;
  const QuadraticUtility f(q, v2(0, 0));
  CHECK(f.q()(0, 1) == 1.0);
  CHECK(f.q()(1, 0) == 1.0);
  CHECK_THROWS_AS(QuadraticUtility(Mat::Zero(2, 3), v2(0, 0)), DomainError);
  CHECK(QuadraticUtility::target(v3(1, 2, 3)).smoothness() == doctest::Approx(2.0));
}

TEST_CASE("benefit examples") {
  const auto human = QuadraticUtility::target(v3(60, 70, 30));
  CHECK(benefit(human, AgentState(v3(50, 50, 50)), TradeOffer(v3(0, -10, 5)), Side::Responding) == 475.0);
  const auto agent = QuadraticUtility::target(v3(33, 33, 33));
  CHECK(benefit(agent, AgentState(v3(50, 50, 55)), TradeOffer(v3(0, 0, 0)), Side::Offering) == 0.0);
  CHECK(benefit(human, AgentState(v3(50, 60, 45)), TradeOffer(v3(5, 0, 0)), Side::Offering) == 75.0);
  CHECK_THROWS_AS(benefit(human, AgentState(v3(1, 1, 1)), TradeOffer(v3(5, 0, 0)), Side::Responding), InfeasibleTrade);
}

TEST_CASE("respond follows greedy rationality") {
  const auto human = QuadraticUtility::target(v3(60, 70, 30));
  CHECK(respond(human, AgentState(v3(50, 50, 50)), TradeOffer(v3(0, -10, 5))) == Response::Accept);
  CHECK(respond(human, AgentState(v3(50, 50, 50)), TradeOffer(v3(0, 0, 0))) == Response::Accept);
  const auto lin = QuadraticUtility::linear(v2(1, 0));
  CHECK(respond(lin, AgentState(v2(5, 5)), TradeOffer(v2(1, 0))) == Response::Reject);
  // infeasible offers are declined rather than raising
  CHECK(respond(lin, AgentState(v2(0.5, 5)), TradeOffer(v2(1, 0))) == Response::Reject);
}

TEST_CASE("respond agrees with a brute-force benefit check") {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> pos(0.0, 100.0), step(-5.0, 5.0);
  for (int trial = 0; trial < 500; ++trial) {
    const int n = 2 + trial % 3;
    const auto f = random_quadratic(rng, n);
    Vec s(n), t(n);
    for (int i = 0; i < n; ++i) {
      s[i] = pos(rng);
      t[i] = step(rng);
    }
    const bool feasible = ((s - t).array() >= 0.0).all();
    const Response r = respond(f, AgentState(s), TradeOffer(t));
    if (!feasible) {
      CHECK(r == Response::Reject);
    } else {
      const double b = f.value(s - t) - f.value(s);
      CHECK((r == Response::Accept) == (b >= 0.0));
    }
  }
}

TEST_CASE("feasibility") {
  const OfferLimits caps{5 * std::sqrt(3.0), 5.0};
  const AgentState rich(v3(100, 100, 100));
  CHECK(is_feasible(rich, rich, TradeOffer(v3(5, 0, 0)), caps));
  CHECK_FALSE(is_feasible(rich, AgentState(v3(2, 100, 100)), TradeOffer(v3(3, 0, 0)), caps));
  CHECK_FALSE(is_feasible(rich, rich, TradeOffer(v3(6, 0, 0)), caps));
  CHECK(is_feasible(rich, rich, TradeOffer(v3(5, 5, 5)), caps));
  CHECK_FALSE(is_feasible(rich, rich, TradeOffer(v3(5, 5, 5)), OfferLimits{8.0, 5.0}));
}

TEST_CASE("apply_trade conserves resources") {
  const AgentState s(v3(50, 50, 50));
  const auto [a, b] = apply_trade(s, s, TradeOffer(v3(0, -10, 5)));
  CHECK(a.resources() == v3(50, 40, 55));
  CHECK(b.resources() == v3(50, 60, 45));
  const auto [a0, b0] = apply_trade(s, s, TradeOffer(Vec::Zero(3)));
  CHECK(a0 == s);
  CHECK(b0 == s);
  CHECK_THROWS_AS(apply_trade(s, AgentState(v3(1, 1, 1)), TradeOffer(v3(2, 0, 0))), InfeasibleTrade);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> pos(10.0, 100.0), step(-5.0, 5.0);
  for (int trial = 0; trial < 100; ++trial) {
    Vec sa(3), sb(3), t(3);
    for (int i = 0; i < 3; ++i) {
      sa[i] = pos(rng);
      sb[i] = pos(rng);
      t[i] = step(rng);
    }
    const auto [na, nb] = apply_trade(AgentState(sa), AgentState(sb), TradeOffer(t));
    CHECK(((na.resources() + nb.resources()) - (sa + sb)).cwiseAbs().maxCoeff() <= 1e-12);
  }
}

TEST_CASE("active categories") {
  CHECK(active_categories(AgentState(v2(0, 100)), AgentState(v2(200, 100))) == std::vector<int>{1});
  CHECK(active_categories(AgentState(v2(100, 100)), AgentState(v2(100, 100))) == std::vector<int>{0, 1});
  CHECK(active_categories(AgentState(v2(0, 0)), AgentState(v2(200, 200))).empty());
}

TEST_CASE("value types validate their invariants") {
  CHECK_THROWS_AS(AgentState(v2(-1, 0)), DomainError);
  CHECK_THROWS_AS(TradeOffer(v2(0.5, 1), true), DomainError);
  CHECK_NOTHROW(TradeOffer(v2(-3, 1), true));
  CHECK_THROWS_AS((OfferLimits{0.0, std::nullopt}.validate()), DomainError);
  CHECK_THROWS_AS((OfferLimits{1.0, 0.0}.validate()), DomainError);
  BenefitRecord r{3.5, -1.25};
  CHECK(r.societal() == 2.25);
}

TEST_CASE("utility JSON round trip") {
  std::mt19937_64 rng(2);
  const auto f = random_quadratic(rng, 3);
  const auto g = utility_from_json(to_json(f));
  CHECK(g.q() == f.q());
  CHECK(g.u() == f.u());
  const OfferLimits l{8.5, 5.0};
  const auto l2 = limits_from_json(to_json(l));
  CHECK(l2.norm_cap == 8.5);
  CHECK(*l2.per_category_cap == 5.0);
}

#pragma once

#include <optional>
#include <span>
#include <vector>

#include "trade/geometry.hpp"

namespace trade {

struct InfeasibleTrade : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Nonnegative resource holdings of one agent.
class AgentState {
 public:
  AgentState() = default;
  explicit AgentState(Vec resources);

  const Vec& resources() const { return resources_; }
  int dim() const { return static_cast<int>(resources_.size()); }
  double operator[](int i) const { return resources_[i]; }
  bool operator==(const AgentState& o) const { return resources_ == o.resources_; }

 private:
  Vec resources_;
};

/// Signed change of the offering agent's holdings.
class TradeOffer {
 public:
  TradeOffer() = default;
  explicit TradeOffer(Vec delta, bool discrete = false);

  static TradeOffer integer(const Vec& delta) { return TradeOffer(delta, true); }

  const Vec& delta() const { return delta_; }
  bool discrete() const { return discrete_; }
  int dim() const { return static_cast<int>(delta_.size()); }
  double norm() const { return delta_.norm(); }
  bool is_zero() const { return delta_.isZero(0.0); }

 private:
  Vec delta_;
  bool discrete_ = false;
};

class Utility {
 public:
  virtual ~Utility() = default;
  virtual int dim() const = 0;
  virtual double value(const Vec& s) const = 0;
  virtual Vec gradient(const Vec& s) const = 0;
  // Bound on |f(y) - f(x) - <grad f(x), y - x>| / (|y - x|^2 / 2).
  virtual double smoothness() const = 0;
};

/// f(S) = S^T Q S + 2 S^T u with Q symmetrized on construction.
class QuadraticUtility final : public Utility {
 public:
  QuadraticUtility(Mat q, Vec u);

  static QuadraticUtility linear(Vec u);
  // -|S|^2 + 2 S.b, maximized at S = b.
  static QuadraticUtility target(const Vec& b);

  int dim() const override { return static_cast<int>(u_.size()); }
  double value(const Vec& s) const override;
  Vec gradient(const Vec& s) const override;
  double smoothness() const override { return smoothness_; }

  const Mat& q() const { return q_; }
  const Vec& u() const { return u_; }

 private:
  Mat q_;
  Vec u_;
  double smoothness_;
};

struct OfferLimits {
  double norm_cap = 1.0;
  std::optional<double> per_category_cap;

  void validate() const;
};

struct BenefitRecord {
  double offering = 0.0;
  double responding = 0.0;
  double societal() const { return offering + responding; }
};

enum class Side { Offering, Responding };
enum class Response { Accept, Reject };

double utility_eval(const Utility& f, const AgentState& s);
Vec utility_gradient(const Utility& f, const AgentState& s);
double benefit(const Utility& f, const AgentState& s, const TradeOffer& t, Side side);
Response respond(const Utility& f_b, const AgentState& s_b, const TradeOffer& t);
bool is_feasible(const AgentState& s_a, const AgentState& s_b, const TradeOffer& t, const OfferLimits& limits);
// Nonnegativity of both post-trade states only.
bool resources_allow(const AgentState& s_a, const AgentState& s_b, const Vec& t);
std::pair<AgentState, AgentState> apply_trade(const AgentState& s_a, const AgentState& s_b, const TradeOffer& t);
std::vector<int> active_categories(const AgentState& s_a, const AgentState& s_b);

}  // namespace trade

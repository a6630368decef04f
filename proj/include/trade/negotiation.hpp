#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "trade/core.hpp"

namespace trade {

enum class Mode { Continuous, Discrete };

enum class Stage { Heuristic, Quadrant, Orthogonal, Bisecting, Counteroffer, Random, Momentum, Greedy };

enum class TerminalReason { None, Budget, AngleThreshold, NoFeasibleOffer, ExhaustedCategories, ExternalStop };

const char* to_string(Mode m);
const char* to_string(Stage s);
const char* to_string(TerminalReason r);
const char* to_string(Response r);
Mode mode_from_string(const std::string& s);
Stage stage_from_string(const std::string& s);
TerminalReason terminal_from_string(const std::string& s);
Response response_from_string(const std::string& s);

/// The offering agent's picture of the market, restricted to active categories.
class MarketView {
 public:
  MarketView(const AgentState& s_a, const AgentState& s_b, const Utility& f_a, const OfferLimits& limits, Mode mode);

  int dim() const { return static_cast<int>(active_.size()); }
  int full_dim() const { return full_s_a_.dim(); }
  const std::vector<int>& active() const { return active_; }
  const Vec& s_a() const { return s_a_; }
  const Vec& s_b() const { return s_b_; }
  const AgentState& full_s_a() const { return full_s_a_; }
  const AgentState& full_s_b() const { return full_s_b_; }
  const Utility& f_a() const { return *f_a_; }
  const OfferLimits& limits() const { return limits_; }
  Mode mode() const { return mode_; }
  bool discrete() const { return mode_ == Mode::Discrete; }

  Vec gradient() const { return gradient_; }
  double offering_benefit(const Vec& t) const;
  bool resources_allow(const Vec& t) const;
  bool feasible(const Vec& t) const;
  // Largest s in [0, limit] such that s * dir satisfies caps and nonnegativity.
  double max_scale(const Vec& dir, double limit) const;
  // Per-component bounds lo <= t_i <= hi from resources and the per-category cap.
  std::pair<Vec, Vec> component_bounds() const;

  Vec lift(const Vec& t) const;
  Vec restrict(const Vec& full) const;
  // True when `full` is zero on every inactive category.
  bool supported(const Vec& full) const;

 private:
  AgentState full_s_a_, full_s_b_;
  const Utility* f_a_;
  OfferLimits limits_;
  Mode mode_;
  std::vector<int> active_;
  Vec s_a_, s_b_, gradient_;
};

struct ConeSnapshot {
  Vec tau;  // full dimension, zero on inactive categories
  double theta = 0.0;
};

struct DiscreteDiagnostics {
  int corner_count = 0;
  double sphere_radius = 0.0;
  bool adopted = false;
};

struct Proposal {
  std::optional<Vec> offer;  // restricted coordinates
  Stage stage = Stage::Heuristic;
  TerminalReason reason = TerminalReason::None;
  std::optional<ConeSnapshot> cone;
  std::optional<DiscreteDiagnostics> discrete;
  std::string tag;
};

enum class ConeEvent { QuadrantInit, Refine, WarmStart, DiscreteAdopt, Expansion, Reinit, CounterMirror };
const char* to_string(ConeEvent e);

struct ConeUpdate {
  ConeEvent kind;
  int step = 0;  // offers emitted before the update
  std::vector<int> active;
  Vec tau_before;  // empty when there was no previous cone
  double theta_before = 0.0;
  Vec tau_after;
  double theta_after = 0.0;
};

class OfferPolicy {
 public:
  virtual ~OfferPolicy() = default;
  virtual std::string name() const = 0;
  virtual Proposal propose(const MarketView& view) = 0;
  // Response to the offer returned by the last propose().
  virtual void observe(const MarketView& view, const Vec& offer, Response r) = 0;
  // Response to an offer the policy did not generate (an echoed counteroffer).
  virtual void observe_external(const MarketView& view, const Vec& offer, Response r) {
    (void)view, (void)offer, (void)r;
  }
  virtual void counteroffer(const MarketView& view, const Vec& counter) { (void)view, (void)counter; }

  const std::vector<ConeUpdate>& cone_log() const { return cone_log_; }
  void set_step(int step) { step_ = step; }

 protected:
  void log_cone(ConeUpdate u) {
    u.step = step_;
    cone_log_.push_back(std::move(u));
  }

 private:
  std::vector<ConeUpdate> cone_log_;
  int step_ = 0;
};

struct TranscriptEvent {
  int step = 0;
  Stage stage = Stage::Heuristic;
  Vec offer;
  Response response = Response::Reject;
  Vec s_a, s_b;  // before the offer
  BenefitRecord benefit;  // of the offer, whether or not it was accepted
  bool responding_known = true;
  std::optional<ConeSnapshot> cone;
  std::optional<DiscreteDiagnostics> discrete;
  std::string tag;
};

struct NegotiationTranscript {
  std::string algorithm;
  std::vector<TranscriptEvent> events;
  std::vector<ConeUpdate> cone_updates;
  TerminalReason terminal = TerminalReason::None;

  int accepted_count() const;
  // Rejections after the last acceptance.
  int trailing_rejections() const;
  // Cumulative accepted benefit after each offer (index i = after offer i + 1).
  std::vector<BenefitRecord> cumulative() const;
};

using Responder = std::function<Response(const AgentState& s_b, const TradeOffer& t)>;

Responder greedy_responder(std::shared_ptr<const Utility> f_b);

struct PendingOffer {
  TradeOffer offer;
  Proposal proposal;
  bool external = false;
};

/// Offer/response state machine driving one OfferPolicy. Responses may arrive
/// at any time; the engine holds at most one pending offer.
class Negotiation {
 public:
  Negotiation(AgentState s_a, AgentState s_b, std::shared_ptr<const Utility> f_a, OfferLimits limits, Mode mode,
              std::unique_ptr<OfferPolicy> policy, int budget, std::shared_ptr<const Utility> f_b = nullptr);

  // Pending offer, computing one if needed; nullopt once terminal.
  const std::optional<PendingOffer>& pending();
  void respond(Response r, const std::string& tag = {});
  // The responder declines the pending offer and proposes `counter_full`
  // (in the offering agent's gain convention).
  void counter(const Vec& counter_full);
  void stop(TerminalReason reason = TerminalReason::ExternalStop);

  bool terminal() const { return transcript_.terminal != TerminalReason::None; }
  const AgentState& s_a() const { return s_a_; }
  const AgentState& s_b() const { return s_b_; }
  const NegotiationTranscript& transcript() const;
  int offers_made() const { return static_cast<int>(transcript_.events.size()); }
  OfferPolicy& policy() { return *policy_; }
  Mode mode() const { return mode_; }

 private:
  MarketView view() const;
  void advance();
  void record(const PendingOffer& p, Response r, const std::string& tag);

  AgentState s_a_, s_b_;
  std::shared_ptr<const Utility> f_a_, f_b_;
  OfferLimits limits_;
  Mode mode_;
  std::unique_ptr<OfferPolicy> policy_;
  int budget_;
  std::optional<PendingOffer> pending_;
  std::string next_tag_;
  mutable NegotiationTranscript transcript_;
};

NegotiationTranscript run_negotiation(const AgentState& s_a, const AgentState& s_b, std::shared_ptr<const Utility> f_a,
                                      const OfferLimits& limits, Mode mode, std::unique_ptr<OfferPolicy> policy,
                                      const Responder& responder, int budget,
                                      std::shared_ptr<const Utility> f_b_accounting = nullptr);

}  // namespace trade

#pragma once

#include <functional>
#include <optional>
#include <vector>

#include "trade/discrete.hpp"
#include "trade/negotiation.hpp"

namespace trade {

struct NegotiationParams {
  int offer_budget = 100;
  double angle_threshold = 1e-5;
  double cone_expansion_rate = 0.02;  // warm-start b, radians per unit of trade norm
  bool use_prev_trade_heuristic = true;
  bool use_cone_warm_start = true;
  double halving_floor = 1.0 / 16.0;   // fraction of d
  double min_magnitude = 0.1;          // fraction of d
  double expansion_factor = 1.1;       // empty integer polytope

  void validate() const;
};

struct RefinementState {
  std::optional<GradientCone> cone;
  std::vector<Vec> batch;             // rejected offers since the last cone update
  Vec quadrant;                       // signed axis probes, zero where skipped
  int offers_made = 0;
  std::vector<Halfspace> extra_constraints;  // from counteroffers, <normal, grad f_B> >= 0
  std::vector<Vec> excluded;          // directions dropped as hopeless at this state
};

// Restricted-coordinate operations. `view` describes the state at which the
// offer would be made.
std::optional<Vec> stage1_heuristic(const MarketView& view, const Vec& prev_full, const NegotiationParams& params);
std::optional<Vec> quadrant_probe(const MarketView& view, int axis, const NegotiationParams& params);
GradientCone quadrant_cone(const Vec& quadrant);
std::optional<Vec> generate_orthogonal_offer(const MarketView& view, RefinementState& state,
                                             const NegotiationParams& params);
GradientCone refine_cone(const GradientCone& cone, const std::vector<Vec>& batch);
void incorporate_counteroffer(RefinementState& state, const Vec& counter);
// nullopt signals that the inflated cone passed pi/2 and quadrant probes must rerun.
std::optional<GradientCone> warm_start_cone(const GradientCone& prev, const Vec& accepted, double b);
std::optional<Vec> ensure_beneficial(const MarketView& view, const Vec& t, const NegotiationParams& params);

// Cone after filtering against counteroffer constraints: reflected across each
// violated constraint's hyperplane.
GradientCone mirror_into_constraints(const GradientCone& cone, const std::vector<Halfspace>& constraints);

/// Sequential trading with cone refinement, continuous or integer offers.
class StcrPolicy final : public OfferPolicy {
 public:
  using StepObserver = std::function<void(const MarketView&, const discrete::StepResult&)>;

  explicit StcrPolicy(NegotiationParams params = {});

  std::string name() const override { return params_.use_prev_trade_heuristic ? "stcr" : "stcr-noheur"; }
  Proposal propose(const MarketView& view) override;
  void observe(const MarketView& view, const Vec& offer, Response r) override;
  void observe_external(const MarketView& view, const Vec& offer, Response r) override;
  void counteroffer(const MarketView& view, const Vec& counter) override;

  const RefinementState& state() const { return state_; }
  void set_step_observer(StepObserver obs) { observer_ = std::move(obs); }

 private:
  enum class Phase { Heuristic, EnterRefine, Quadrant, Refine };

  void reset_for(const MarketView& view);
  void accepted(const MarketView& view, const Vec& offer);
  void set_cone(const MarketView& view, ConeEvent kind, const GradientCone& next);
  Proposal emit(const MarketView& view, Vec offer, Stage stage);
  Proposal finish(TerminalReason reason);
  std::optional<Proposal> refine_continuous(const MarketView& view);
  std::optional<Proposal> refine_discrete(const MarketView& view);
  Vec cone_full(const MarketView& view, const Vec& tau) const { return view.lift(tau); }

  NegotiationParams params_;
  Phase phase_ = Phase::Heuristic;
  std::vector<int> active_;
  RefinementState state_;
  std::optional<Vec> prev_full_;
  int quadrant_axis_ = 0;
  Stage last_stage_ = Stage::Heuristic;
  std::optional<DiscreteDiagnostics> last_diag_;
  StepObserver observer_;
};

}  // namespace trade

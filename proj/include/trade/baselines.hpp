#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "trade/negotiation.hpp"

namespace trade {

using Rng = std::mt19937_64;

// Uniform direction on the unit sphere.
Vec sample_direction(Rng& rng, int n);

// Random offer: uniform direction at the largest feasible magnitude, flipped
// when it does not help the offering agent and resampled when still harmful.
std::optional<Vec> sample_uniform_offer(const MarketView& view, Rng& rng, int max_retries = 50);

class RandomPolicy final : public OfferPolicy {
 public:
  RandomPolicy(std::uint64_t seed, bool with_prev_heuristic);

  std::string name() const override { return with_prev_ ? "random-prev" : "random"; }
  Proposal propose(const MarketView& view) override;
  void observe(const MarketView& view, const Vec& offer, Response r) override;
  void observe_external(const MarketView& view, const Vec& offer, Response r) override;

 private:
  Rng rng_;
  bool with_prev_;
  bool try_prev_ = false;
  std::optional<Vec> prev_full_;
};

struct MomentumState {
  double d_dev = 0.0;
  double d_interval = 0.05;
  double d_max = 5.0;
  std::optional<Vec> t_prev;  // full coordinates
};

class MomentumPolicy final : public OfferPolicy {
 public:
  explicit MomentumPolicy(std::uint64_t seed, MomentumState init = {});

  std::string name() const override { return "random-momentum"; }
  Proposal propose(const MarketView& view) override;
  void observe(const MarketView& view, const Vec& offer, Response r) override;
  void observe_external(const MarketView& view, const Vec& offer, Response r) override;

  const MomentumState& state() const { return state_; }
  // d_dev in effect when each offer was emitted.
  const std::vector<double>& deviation_log() const { return deviation_log_; }

 private:
  std::optional<Vec> deviated(const MarketView& view);

  Rng rng_;
  MomentumState state_;
  bool reoffer_prev_ = false;
  std::vector<double> deviation_log_;
};

struct BeliefState {
  std::vector<Vec> weights;
  std::vector<double> probs;
  double shrink = 0.1;
  int update_interval = 10;
  double softmax_temperature = 0.02;

  static BeliefState uniform(int n, int n_weights, Rng& rng);
  double total() const;
};

struct ScoredOffer {
  Vec offer;
  double gain = 0.0;
  double p_accept = 0.0;
  double score = 0.0;
};

// Integer offers within the caps, the norm bound and both agents' holdings.
std::vector<Vec> gca_candidates(const MarketView& view);
std::vector<ScoredOffer> gca_expected_sort(const MarketView& view, const BeliefState& beliefs,
                                           const std::vector<Vec>& candidates);
BeliefState gca_belief_update(BeliefState beliefs, const std::vector<Vec>& rejected);
BeliefState gca_softmax_smooth(BeliefState beliefs);

class GcaPolicy final : public OfferPolicy {
 public:
  struct Options {
    int n_weights = 100;
    double shrink = 0.1;
    int update_interval = 10;
    double softmax_temperature = 0.02;
  };

  GcaPolicy(std::uint64_t seed, Options opts);

  std::string name() const override { return "gca"; }
  Proposal propose(const MarketView& view) override;
  void observe(const MarketView& view, const Vec& offer, Response r) override;
  void observe_external(const MarketView& view, const Vec& offer, Response r) override;

  const BeliefState& beliefs() const { return beliefs_; }
  // Score of each emitted offer at emission time, reset by every re-sort.
  const std::vector<std::vector<double>>& emission_runs() const { return emission_runs_; }
  int belief_updates() const { return belief_updates_; }

 private:
  void rebuild(const MarketView& view);
  void accepted();

  Rng rng_;
  Options opts_;
  BeliefState beliefs_;
  std::optional<std::vector<int>> active_;
  std::vector<ScoredOffer> sorted_;
  std::size_t cursor_ = 0;
  bool stale_ = true;
  std::vector<Vec> rejected_;
  int offers_in_round_ = 0;
  int belief_updates_ = 0;
  std::vector<std::vector<double>> emission_runs_;
};

}  // namespace trade

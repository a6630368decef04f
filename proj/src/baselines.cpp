#include "trade/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "trade/rounding.hpp"

namespace trade {

Vec sample_direction(Rng& rng, int n) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec v(n);
  do {
    for (int i = 0; i < n; ++i) v[i] = normal(rng);
  } while (v.norm() == 0.0);
  return v.normalized();
}

namespace {

// Offer along `dir` at the largest feasible magnitude, integer in discrete mode.
std::optional<Vec> scaled_along(const MarketView& view, const Vec& dir) {
  const double s = view.max_scale(dir, view.limits().norm_cap);
  if (s <= 0.0) return std::nullopt;
  if (!view.discrete()) return Vec(dir * s);
  return round_nearest_feasible(view, dir * s);
}

}  // namespace

std::optional<Vec> sample_uniform_offer(const MarketView& view, Rng& rng, int max_retries) {
  for (int attempt = 0; attempt < max_retries; ++attempt) {
    const Vec dir = sample_direction(rng, view.dim());
    auto t = scaled_along(view, dir);
    if (!t || view.offering_benefit(*t) <= 0.0) t = scaled_along(view, -dir);
    if (t && view.offering_benefit(*t) >= 0.0) return t;
  }
  return std::nullopt;
}

// ---------------------------------------------------------------------------

RandomPolicy::RandomPolicy(std::uint64_t seed, bool with_prev_heuristic) : rng_(seed), with_prev_(with_prev_heuristic) {}

Proposal RandomPolicy::propose(const MarketView& view) {
  Proposal p;
  if (try_prev_ && prev_full_ && view.supported(*prev_full_)) {
    const Vec t = view.restrict(*prev_full_);
    if (view.feasible(t) && view.offering_benefit(t) >= 0.0) {
      p.offer = t;
      p.stage = Stage::Heuristic;
      return p;
    }
  }
  try_prev_ = false;
  p.offer = sample_uniform_offer(view, rng_);
  p.stage = Stage::Random;
  if (!p.offer) p.reason = TerminalReason::NoFeasibleOffer;
  return p;
}

void RandomPolicy::observe(const MarketView& view, const Vec& offer, Response r) {
  if (r == Response::Accept) {
    prev_full_ = view.lift(offer);
    try_prev_ = with_prev_;
  } else {
    try_prev_ = false;
  }
}

void RandomPolicy::observe_external(const MarketView& view, const Vec& offer, Response r) {
  if (r == Response::Accept) observe(view, offer, r);
}

// ---------------------------------------------------------------------------

MomentumPolicy::MomentumPolicy(std::uint64_t seed, MomentumState init) : rng_(seed), state_(std::move(init)) {
  reoffer_prev_ = state_.t_prev.has_value();
}

std::optional<Vec> MomentumPolicy::deviated(const MarketView& view) {
  const Vec prev = view.restrict(*state_.t_prev);
  if (prev.norm() == 0.0) return std::nullopt;
  for (int attempt = 0; attempt < 50; ++attempt) {
    const Vec dev = prev.normalized() + state_.d_dev * sample_direction(rng_, view.dim());
    if (dev.norm() == 0.0) continue;
    auto t = scaled_along(view, dev.normalized());
    if (t && view.offering_benefit(*t) >= 0.0) return t;
  }
  return std::nullopt;
}

Proposal MomentumPolicy::propose(const MarketView& view) {
  Proposal p;
  if (state_.t_prev && view.supported(*state_.t_prev)) {
    if (reoffer_prev_) {
      reoffer_prev_ = false;
      const Vec t = view.restrict(*state_.t_prev);
      if (view.feasible(t) && view.offering_benefit(t) >= 0.0) {
        p.offer = t;
        p.stage = Stage::Heuristic;
        deviation_log_.push_back(state_.d_dev);
        return p;
      }
      state_.d_dev = std::min(state_.d_dev + state_.d_interval, state_.d_max);
    }
    p.offer = deviated(view);
    p.stage = Stage::Momentum;
  }
  if (!p.offer) {
    p.offer = sample_uniform_offer(view, rng_);
    p.stage = Stage::Random;
  }
  if (!p.offer) p.reason = TerminalReason::NoFeasibleOffer;
  else deviation_log_.push_back(state_.d_dev);
  return p;
}

void MomentumPolicy::observe(const MarketView& view, const Vec& offer, Response r) {
  if (r == Response::Accept) {
    state_.t_prev = view.lift(offer);
    state_.d_dev = 0.0;
    reoffer_prev_ = true;
  } else if (state_.t_prev) {
    state_.d_dev = std::min(state_.d_dev + state_.d_interval, state_.d_max);
  }
}

void MomentumPolicy::observe_external(const MarketView& view, const Vec& offer, Response r) {
  if (r == Response::Accept) observe(view, offer, r);
}

// ---------------------------------------------------------------------------

BeliefState BeliefState::uniform(int n, int n_weights, Rng& rng) {
  BeliefState b;
  for (int i = 0; i < n_weights; ++i) b.weights.push_back(sample_direction(rng, n));
  b.probs.assign(n_weights, 1.0 / n_weights);
  return b;
}

double BeliefState::total() const { return std::accumulate(probs.begin(), probs.end(), 0.0); }

namespace {

void renormalize(std::vector<double>& p) {
  // Compensated summation keeps the renormalized total within a few ulps of one.
  double sum = 0.0, comp = 0.0;
  for (double x : p) {
    const double y = x - comp;
    const double t = sum + y;
    comp = (t - sum) - y;
    sum = t;
  }
  if (!(sum > 1e-300)) {
    std::fill(p.begin(), p.end(), 1.0 / static_cast<double>(p.size()));
    return;
  }
  for (double& x : p) x /= sum;
}

}  // namespace

std::vector<Vec> gca_candidates(const MarketView& view) {
  const int n = view.dim();
  auto [lo, hi] = view.component_bounds();
  const double d = view.limits().norm_cap;
  Vec ilo(n), ihi(n);
  for (int i = 0; i < n; ++i) {
    ilo[i] = std::max(std::ceil(lo[i]), -std::floor(d));
    ihi[i] = std::min(std::floor(hi[i]), std::floor(d));
  }
  std::vector<Vec> out;
  if (n == 0) return out;
  Vec z = ilo;
  for (;;) {
    if (!z.isZero(0.0) && z.norm() <= d * (1.0 + 1e-12)) out.push_back(z);
    int i = n - 1;
    while (i >= 0 && z[i] >= ihi[i]) {
      z[i] = ilo[i];
      --i;
    }
    if (i < 0) break;
    z[i] += 1.0;
  }
  return out;
}

std::vector<ScoredOffer> gca_expected_sort(const MarketView& view, const BeliefState& beliefs,
                                           const std::vector<Vec>& candidates) {
  std::vector<ScoredOffer> out;
  out.reserve(candidates.size());
  for (const Vec& t : candidates) {
    ScoredOffer s;
    s.offer = t;
    s.gain = view.offering_benefit(t);
    const Vec full = view.lift(t);
    for (std::size_t i = 0; i < beliefs.weights.size(); ++i)
      if (-full.dot(beliefs.weights[i]) > 0.0) s.p_accept += beliefs.probs[i];
    s.score = s.p_accept * s.gain;
    out.push_back(std::move(s));
  }
  std::stable_sort(out.begin(), out.end(), [](const ScoredOffer& a, const ScoredOffer& b) {
    if (a.score != b.score) return a.score > b.score;
    return std::lexicographical_compare(a.offer.data(), a.offer.data() + a.offer.size(), b.offer.data(),
                                        b.offer.data() + b.offer.size());
  });
  return out;
}

BeliefState gca_belief_update(BeliefState beliefs, const std::vector<Vec>& rejected) {
  for (const Vec& t : rejected)
    for (std::size_t i = 0; i < beliefs.weights.size(); ++i)
      if (-t.dot(beliefs.weights[i]) > 0.0) beliefs.probs[i] *= beliefs.shrink;
  renormalize(beliefs.probs);
  return beliefs;
}

BeliefState gca_softmax_smooth(BeliefState beliefs) {
  if (beliefs.probs.empty()) return beliefs;
  const double mx = *std::max_element(beliefs.probs.begin(), beliefs.probs.end());
  for (double& p : beliefs.probs) p = std::exp((p - mx) / beliefs.softmax_temperature);
  renormalize(beliefs.probs);
  return beliefs;
}

GcaPolicy::GcaPolicy(std::uint64_t seed, Options opts) : rng_(seed), opts_(opts) {
  if (opts_.update_interval < 1) throw DomainError("GCA update interval must be at least 1");
  if (opts_.n_weights < 1) throw DomainError("GCA needs at least one weight");
}

void GcaPolicy::rebuild(const MarketView& view) {
  if (beliefs_.weights.empty()) {
    beliefs_ = BeliefState::uniform(view.full_dim(), opts_.n_weights, rng_);
    beliefs_.shrink = opts_.shrink;
    beliefs_.update_interval = opts_.update_interval;
    beliefs_.softmax_temperature = opts_.softmax_temperature;
  }
  sorted_ = gca_expected_sort(view, beliefs_, gca_candidates(view));
  cursor_ = 0;
  rejected_.clear();
  offers_in_round_ = 0;
  active_ = view.active();
  stale_ = false;
  emission_runs_.emplace_back();
}

Proposal GcaPolicy::propose(const MarketView& view) {
  if (!view.discrete()) throw DomainError("GCA requires integer offers");
  if (stale_ || !active_ || *active_ != view.active()) rebuild(view);
  Proposal p;
  p.stage = Stage::Greedy;
  while (cursor_ < sorted_.size()) {
    const ScoredOffer& s = sorted_[cursor_++];
    if (s.gain > 0.0) {
      p.offer = s.offer;
      emission_runs_.back().push_back(s.score);
      return p;
    }
  }
  p.reason = TerminalReason::NoFeasibleOffer;
  return p;
}

void GcaPolicy::accepted() {
  beliefs_ = gca_softmax_smooth(std::move(beliefs_));
  stale_ = true;
}

void GcaPolicy::observe(const MarketView& view, const Vec& offer, Response r) {
  ++offers_in_round_;
  if (r == Response::Accept) {
    accepted();
    return;
  }
  rejected_.push_back(view.lift(offer));
  if (offers_in_round_ % opts_.update_interval == 0) {
    beliefs_ = gca_belief_update(std::move(beliefs_), rejected_);
    ++belief_updates_;
    std::vector<Vec> rest;
    for (std::size_t i = cursor_; i < sorted_.size(); ++i) rest.push_back(sorted_[i].offer);
    sorted_ = gca_expected_sort(view, beliefs_, rest);
    cursor_ = 0;
    emission_runs_.emplace_back();
  }
}

void GcaPolicy::observe_external(const MarketView& view, const Vec& offer, Response r) {
  (void)view, (void)offer;
  if (r == Response::Accept) accepted();
}

}  // namespace trade

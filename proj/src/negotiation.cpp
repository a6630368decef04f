#include "trade/negotiation.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string_view>

namespace trade {

namespace {

template <typename E, std::size_t N>
E parse_enum(const std::string& s, const std::array<std::pair<E, const char*>, N>& table, const char* what) {
  for (const auto& [e, name] : table)
    if (s == name) return e;
  throw DomainError(std::string("unknown ") + what + ": " + s);
}

template <typename E, std::size_t N>
const char* name_of(E e, const std::array<std::pair<E, const char*>, N>& table) {
  for (const auto& [v, name] : table)
    if (v == e) return name;
  return "?";
}

constexpr std::array<std::pair<Mode, const char*>, 2> kModes{{{Mode::Continuous, "continuous"}, {Mode::Discrete, "discrete"}}};
constexpr std::array<std::pair<Stage, const char*>, 8> kStages{{{Stage::Heuristic, "heuristic"},
                                                                {Stage::Quadrant, "quadrant"},
                                                                {Stage::Orthogonal, "orthogonal"},
                                                                {Stage::Bisecting, "bisecting"},
                                                                {Stage::Counteroffer, "counteroffer"},
                                                                {Stage::Random, "random"},
                                                                {Stage::Momentum, "momentum"},
                                                                {Stage::Greedy, "greedy"}}};
constexpr std::array<std::pair<TerminalReason, const char*>, 6> kReasons{{{TerminalReason::None, "none"},
                                                                          {TerminalReason::Budget, "budget"},
                                                                          {TerminalReason::AngleThreshold, "angle_threshold"},
                                                                          {TerminalReason::NoFeasibleOffer, "no_feasible_offer"},
                                                                          {TerminalReason::ExhaustedCategories, "exhausted_categories"},
                                                                          {TerminalReason::ExternalStop, "external_stop"}}};
constexpr std::array<std::pair<Response, const char*>, 2> kResponses{{{Response::Accept, "accept"}, {Response::Reject, "reject"}}};
constexpr std::array<std::pair<ConeEvent, const char*>, 7> kConeEvents{{{ConeEvent::QuadrantInit, "quadrant_init"},
                                                                        {ConeEvent::Refine, "refine"},
                                                                        {ConeEvent::WarmStart, "warm_start"},
                                                                        {ConeEvent::DiscreteAdopt, "discrete_adopt"},
                                                                        {ConeEvent::Expansion, "expansion"},
                                                                        {ConeEvent::Reinit, "reinit"},
                                                                        {ConeEvent::CounterMirror, "counter_mirror"}}};

}  // namespace

const char* to_string(Mode m) { return name_of(m, kModes); }
const char* to_string(Stage s) { return name_of(s, kStages); }
const char* to_string(TerminalReason r) { return name_of(r, kReasons); }
const char* to_string(Response r) { return name_of(r, kResponses); }
const char* to_string(ConeEvent e) { return name_of(e, kConeEvents); }
Mode mode_from_string(const std::string& s) { return parse_enum(s, kModes, "mode"); }
Stage stage_from_string(const std::string& s) { return parse_enum(s, kStages, "stage"); }
TerminalReason terminal_from_string(const std::string& s) { return parse_enum(s, kReasons, "terminal reason"); }
Response response_from_string(const std::string& s) { return parse_enum(s, kResponses, "response"); }

// ---------------------------------------------------------------------------

MarketView::MarketView(const AgentState& s_a, const AgentState& s_b, const Utility& f_a, const OfferLimits& limits,
                       Mode mode)
    : full_s_a_(s_a), full_s_b_(s_b), f_a_(&f_a), limits_(limits), mode_(mode),
      active_(active_categories(s_a, s_b)) {
  s_a_ = restrict(s_a.resources());
  s_b_ = restrict(s_b.resources());
  gradient_ = restrict(f_a.gradient(s_a.resources()));
}

Vec MarketView::lift(const Vec& t) const {
  if (t.size() != dim()) throw DomainError("lift: dimension mismatch");
  Vec full = Vec::Zero(full_dim());
  for (int i = 0; i < dim(); ++i) full[active_[i]] = t[i];
  return full;
}

Vec MarketView::restrict(const Vec& full) const {
  if (full.size() != full_dim()) throw DomainError("restrict: dimension mismatch");
  Vec t(dim());
  for (int i = 0; i < dim(); ++i) t[i] = full[active_[i]];
  return t;
}

bool MarketView::supported(const Vec& full) const {
  if (full.size() != full_dim()) return false;
  double inactive = 0.0;
  for (int i = 0; i < full_dim(); ++i)
    if (std::find(active_.begin(), active_.end(), i) == active_.end()) inactive = std::max(inactive, std::abs(full[i]));
  return inactive == 0.0;
}

double MarketView::offering_benefit(const Vec& t) const {
  const Vec full = lift(t);
  return f_a_->value(full_s_a_.resources() + full) - f_a_->value(full_s_a_.resources());
}

bool MarketView::resources_allow(const Vec& t) const { return trade::resources_allow(full_s_a_, full_s_b_, lift(t)); }

bool MarketView::feasible(const Vec& t) const {
  return is_feasible(full_s_a_, full_s_b_, TradeOffer(lift(t)), limits_);
}

double MarketView::max_scale(const Vec& dir, double limit) const {
  double s = limit;
  const double n = dir.norm();
  if (n == 0.0) return 0.0;
  s = std::min(s, limits_.norm_cap / n);
  for (int i = 0; i < dim(); ++i) {
    const double c = dir[i];
    if (c == 0.0) continue;
    if (limits_.per_category_cap) s = std::min(s, *limits_.per_category_cap / std::abs(c));
    s = std::min(s, c > 0.0 ? s_b_[i] / c : s_a_[i] / -c);
  }
  s = std::max(s, 0.0);
  // The quotient can round up by an ulp and leave a holding at -1e-16.
  for (int i = 0; i < dim(); ++i) {
    while (s > 0.0 && (s_a_[i] + s * dir[i] < 0.0 || s_b_[i] - s * dir[i] < 0.0)) s = std::nextafter(s, 0.0);
  }
  return s;
}

std::pair<Vec, Vec> MarketView::component_bounds() const {
  Vec lo = -s_a_;
  Vec hi = s_b_;
  if (limits_.per_category_cap) {
    lo = lo.cwiseMax(-*limits_.per_category_cap);
    hi = hi.cwiseMin(*limits_.per_category_cap);
  }
  return {lo, hi};
}

// ---------------------------------------------------------------------------

int NegotiationTranscript::accepted_count() const {
  return static_cast<int>(std::count_if(events.begin(), events.end(),
                                        [](const TranscriptEvent& e) { return e.response == Response::Accept; }));
}

int NegotiationTranscript::trailing_rejections() const {
  int k = 0;
  for (auto it = events.rbegin(); it != events.rend() && it->response == Response::Reject; ++it) ++k;
  return k;
}

std::vector<BenefitRecord> NegotiationTranscript::cumulative() const {
  std::vector<BenefitRecord> out;
  out.reserve(events.size());
  BenefitRecord acc;
  for (const auto& e : events) {
    if (e.response == Response::Accept) {
      acc.offering += e.benefit.offering;
      acc.responding += e.benefit.responding;
    }
    out.push_back(acc);
  }
  return out;
}

Responder greedy_responder(std::shared_ptr<const Utility> f_b) {
  return [f_b = std::move(f_b)](const AgentState& s_b, const TradeOffer& t) { return respond(*f_b, s_b, t); };
}

// ---------------------------------------------------------------------------

Negotiation::Negotiation(AgentState s_a, AgentState s_b, std::shared_ptr<const Utility> f_a, OfferLimits limits,
                         Mode mode, std::unique_ptr<OfferPolicy> policy, int budget,
                         std::shared_ptr<const Utility> f_b)
    : s_a_(std::move(s_a)), s_b_(std::move(s_b)), f_a_(std::move(f_a)), f_b_(std::move(f_b)), limits_(limits),
      mode_(mode), policy_(std::move(policy)), budget_(budget) {
  if (s_a_.dim() != s_b_.dim() || s_a_.dim() != f_a_->dim()) throw DomainError("negotiation: dimension mismatch");
  if (budget_ < 1) throw DomainError("negotiation: budget must be positive");
  limits_.validate();
  transcript_.algorithm = policy_->name();
}

MarketView Negotiation::view() const { return MarketView(s_a_, s_b_, *f_a_, limits_, mode_); }

const NegotiationTranscript& Negotiation::transcript() const {
  transcript_.cone_updates = policy_->cone_log();
  return transcript_;
}

void Negotiation::advance() {
  if (pending_ || terminal()) return;
  if (offers_made() >= budget_) {
    transcript_.terminal = TerminalReason::Budget;
    return;
  }
  const MarketView v = view();
  if (v.dim() == 0) {
    transcript_.terminal = TerminalReason::ExhaustedCategories;
    return;
  }
  policy_->set_step(offers_made());
  Proposal p = policy_->propose(v);
  if (!p.offer) {
    transcript_.terminal = p.reason == TerminalReason::None ? TerminalReason::NoFeasibleOffer : p.reason;
    return;
  }
  if (p.offer->size() != v.dim()) throw std::logic_error(policy_->name() + ": offer dimension mismatch");
  const Vec full = v.lift(*p.offer);
  if (!trade::resources_allow(s_a_, s_b_, full)) {
    std::ostringstream msg;
    msg << policy_->name() << ": emitted an infeasible offer [" << full.transpose() << "] at S_A [" << s_a_.resources().transpose()
        << "] S_B [" << s_b_.resources().transpose() << "]";
    throw std::logic_error(msg.str());
  }
  TradeOffer t(full, mode_ == Mode::Discrete);
  if (!next_tag_.empty()) p.tag = p.tag.empty() ? next_tag_ : next_tag_ + ";" + p.tag;
  next_tag_.clear();
  pending_ = PendingOffer{std::move(t), std::move(p), false};
}

const std::optional<PendingOffer>& Negotiation::pending() {
  advance();
  return pending_;
}

void Negotiation::record(const PendingOffer& p, Response r, const std::string& tag) {
  TranscriptEvent e;
  e.step = offers_made();
  e.stage = p.proposal.stage;
  e.offer = p.offer.delta();
  e.response = r;
  e.s_a = s_a_.resources();
  e.s_b = s_b_.resources();
  e.benefit.offering = benefit(*f_a_, s_a_, p.offer, Side::Offering);
  if (f_b_) {
    e.benefit.responding = benefit(*f_b_, s_b_, p.offer, Side::Responding);
  } else {
    e.responding_known = false;
  }
  e.cone = p.proposal.cone;
  e.discrete = p.proposal.discrete;
  e.tag = p.proposal.tag;
  if (!tag.empty()) e.tag = e.tag.empty() ? tag : e.tag + ";" + tag;
  transcript_.events.push_back(std::move(e));
}

void Negotiation::respond(Response r, const std::string& tag) {
  advance();
  if (!pending_) throw std::logic_error("respond: no pending offer");
  const PendingOffer p = std::move(*pending_);
  pending_.reset();
  const MarketView before = view();
  record(p, r, tag);
  if (r == Response::Accept) std::tie(s_a_, s_b_) = apply_trade(s_a_, s_b_, p.offer);
  const Vec restricted = before.restrict(p.offer.delta());
  if (p.external)
    policy_->observe_external(before, restricted, r);
  else
    policy_->observe(before, restricted, r);
}

void Negotiation::counter(const Vec& counter_full) {
  advance();
  if (!pending_) throw std::logic_error("counter: no pending offer");
  if (counter_full.size() != s_a_.dim()) throw DomainError("counteroffer: dimension mismatch");
  if (counter_full.isZero(0.0)) {
    respond(Response::Reject, "counteroffer;empty_counteroffer_ignored");
    return;
  }
  respond(Response::Reject, "counteroffer");
  if (terminal()) return;
  const MarketView v = view();
  if (v.supported(counter_full) && v.dim() > 0) policy_->counteroffer(v, v.restrict(counter_full));
  const bool allowed = trade::resources_allow(s_a_, s_b_, counter_full);
  const bool beneficial = allowed && f_a_->value(s_a_.resources() + counter_full) - f_a_->value(s_a_.resources()) >= 0.0;
  if (beneficial && offers_made() < budget_) {
    Proposal p;
    p.offer = v.supported(counter_full) ? v.restrict(counter_full) : Vec();
    p.stage = Stage::Counteroffer;
    p.tag = "counteroffer_beneficial";
    pending_ = PendingOffer{TradeOffer(counter_full, mode_ == Mode::Discrete), std::move(p), true};
  } else {
    next_tag_ = "counteroffer_not_beneficial";
  }
}

void Negotiation::stop(TerminalReason reason) {
  if (terminal()) return;
  pending_.reset();
  transcript_.terminal = reason;
}

NegotiationTranscript run_negotiation(const AgentState& s_a, const AgentState& s_b, std::shared_ptr<const Utility> f_a,
                                      const OfferLimits& limits, Mode mode, std::unique_ptr<OfferPolicy> policy,
                                      const Responder& responder, int budget,
                                      std::shared_ptr<const Utility> f_b_accounting) {
  Negotiation neg(s_a, s_b, std::move(f_a), limits, mode, std::move(policy), budget, std::move(f_b_accounting));
  while (const auto& p = neg.pending()) neg.respond(responder(neg.s_b(), p->offer));
  return neg.transcript();
}

}  // namespace trade

#include "trade/session.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <random>
#include <sstream>

#include "trade/bench.hpp"

namespace trade::session {

using trade::to_json;

namespace {

constexpr int kSessionBudget = 100'000;

std::int64_t to_ms(TimePoint t) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(t.time_since_epoch()).count();
}

TimePoint from_ms(std::int64_t ms) { return TimePoint(std::chrono::milliseconds(ms)); }

TimePoint after(TimePoint t, double seconds) {
  return t + std::chrono::duration_cast<TimePoint::duration>(std::chrono::duration<double>(seconds));
}

Json stamp(Json j, TimePoint at) {
  j["at"] = iso8601(at);
  j["at_ms"] = to_ms(at);
  return j;
}

bool is_integral(const Vec& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i)
    if (!std::isfinite(v[i]) || v[i] != std::round(v[i])) return false;
  return true;
}

}  // namespace

const std::array<Vec, 5>& agent_target_menu() {
  static const std::array<Vec, 5> menu = [] {
    std::array<Vec, 5> m;
    const double rows[5][3] = {{66, 33, 33}, {33, 66, 33}, {33, 33, 66}, {66, 66, 66}, {33, 33, 33}};
    for (int i = 0; i < 5; ++i) m[static_cast<std::size_t>(i)] = Eigen::Map<const Vec>(rows[i], 3);
    return m;
  }();
  return menu;
}

const std::array<std::string, 3>& session_algorithms() {
  static const std::array<std::string, 3> algos{"stcr", "gca", "random-prev"};
  return algos;
}

void SessionConfig::validate() const {
  if (categories.size() != 3) throw ValidationError("config: exactly 3 categories are supported");
  if (!std::isfinite(initial) || initial < 0.0) throw ValidationError("config: initial must be a nonnegative number");
  if (human_target.size() != 3) throw ValidationError("config: human_target must have 3 components");
  for (Eigen::Index i = 0; i < human_target.size(); ++i)
    if (!(human_target[i] >= 0.0 && human_target[i] <= 100.0))
      throw ValidationError("config: human_target components must lie in [0, 100]");
  if (agent_target) {
    bool on_menu = false;
    for (const auto& m : agent_target_menu()) on_menu = on_menu || (agent_target->size() == 3 && *agent_target == m);
    if (!on_menu) throw ValidationError("config: agent_target must be one of the menu targets");
  }
  if (algorithm) {
    bool known = false;
    for (const auto& a : session_algorithms()) known = known || *algorithm == a;
    if (!known) throw ValidationError("config: algorithm must be stcr, gca or random-prev");
  }
  if (!(time_limit > 0.0) || !std::isfinite(time_limit)) throw ValidationError("config: time_limit must be positive");
  if (!(per_offer_timeout > 0.0) || !std::isfinite(per_offer_timeout))
    throw ValidationError("config: per_offer_timeout must be positive");
}

Json to_json(const SessionConfig& cfg) {
  Json j{{"categories", cfg.categories},
         {"initial", cfg.initial},
         {"human_target", to_json(cfg.human_target)},
         {"time_limit", cfg.time_limit},
         {"per_offer_timeout", cfg.per_offer_timeout},
         {"seed", cfg.seed}};
  if (cfg.agent_target) j["agent_target"] = to_json(*cfg.agent_target);
  if (cfg.algorithm) j["algorithm"] = *cfg.algorithm;
  return j;
}

SessionConfig session_config_from_json(const Json& j) {
  if (!j.is_object()) throw ValidationError("config must be a JSON object");
  SessionConfig cfg;
  try {
    if (j.contains("categories")) cfg.categories = j["categories"].get<std::vector<std::string>>();
    if (j.contains("initial")) cfg.initial = j["initial"].get<double>();
    if (!j.contains("human_target")) throw ValidationError("config: human_target is required");
    cfg.human_target = vec_from_json(j["human_target"]);
    if (j.contains("agent_target") && !j["agent_target"].is_null()) cfg.agent_target = vec_from_json(j["agent_target"]);
    if (j.contains("algorithm") && !j["algorithm"].is_null()) cfg.algorithm = j["algorithm"].get<std::string>();
    if (j.contains("time_limit")) cfg.time_limit = j["time_limit"].get<double>();
    if (j.contains("per_offer_timeout")) cfg.per_offer_timeout = j["per_offer_timeout"].get<double>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
  } catch (const Json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  } catch (const DomainError& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  return cfg;
}

Score compute_score(const Vec& target, const Vec& initial, const Vec& final_state) {
  const double denom = (target - initial).lpNorm<1>();
  const double remaining = (target - final_state).lpNorm<1>();
  Score s;
  if (denom == 0.0) {
    s.degenerate = true;
    s.raw = remaining == 0.0 ? 1.0 : 0.0;
  } else {
    s.raw = 1.0 - remaining / denom;
  }
  s.clamped = std::max(0.0, s.raw);
  return s;
}

const char* to_string(AlignmentBin b) {
  switch (b) {
    case AlignmentBin::Aligned: return "0-60";
    case AlignmentBin::Oblique: return "60-120";
    case AlignmentBin::Opposed: return "120-180";
  }
  return "?";
}

std::optional<Alignment> alignment_bin(const Vec& agent_target, const Vec& human_target, const Vec& initial) {
  const Vec a = agent_target - initial, b = human_target - initial;
  if (a.isZero(0.0) || b.isZero(0.0)) return std::nullopt;
  Alignment out;
  out.degrees = angle_between(a, b) * 180.0 / kPi;
  out.bin = out.degrees < 60.0 ? AlignmentBin::Aligned : out.degrees < 120.0 ? AlignmentBin::Oblique : AlignmentBin::Opposed;
  return out;
}

std::string iso8601(TimePoint t) {
  const std::int64_t ms = to_ms(t);
  const std::time_t secs = static_cast<std::time_t>(ms / 1000 - (ms % 1000 < 0 ? 1 : 0));
  const int frac = static_cast<int>(((ms % 1000) + 1000) % 1000);
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec, frac);
  return buf;
}

// ---------------------------------------------------------------------------

Session::Session(std::string id, SessionConfig cfg, TimePoint now, std::uint64_t rotation, Sink sink)
    : id_(std::move(id)), cfg_(std::move(cfg)), created_at_(now), sink_(std::move(sink)) {
  if (!cfg_.agent_target) cfg_.agent_target = agent_target_menu()[rotation % 5];
  if (!cfg_.algorithm) cfg_.algorithm = session_algorithms()[(rotation / 5) % 3];
  cfg_.validate();
  const int n = static_cast<int>(cfg_.categories.size());
  const Vec start = Vec::Constant(n, cfg_.initial);
  auto f_a = std::make_shared<QuadraticUtility>(QuadraticUtility::target(*cfg_.agent_target));
  auto f_b = std::make_shared<QuadraticUtility>(QuadraticUtility::target(cfg_.human_target));
  const OfferLimits limits{5.0 * std::sqrt(static_cast<double>(n)), 5.0};
  auto policy = bench::make_policy(bench::AlgorithmSpec::parse(*cfg_.algorithm), cfg_.seed);
  neg_ = std::make_unique<Negotiation>(AgentState(start), AgentState(start), std::move(f_a), limits, Mode::Discrete,
                                       std::move(policy), kSessionBudget, std::move(f_b));
  create_record_ = stamp(Json{{"type", "create"}, {"id", id_}, {"rotation", rotation}, {"config", to_json(cfg_)}}, now);
  ensure_offer(now);
}

void Session::set_sink(Sink sink) {
  std::lock_guard lock(mu_);
  sink_ = std::move(sink);
}

void Session::emit(const std::vector<Json>& log) {
  if (sink_ && !log.empty()) sink_(log);
}

void Session::ensure_offer(TimePoint at) {
  if (offer_live_) return;
  if (neg_->pending()) {
    ++token_;
    offer_live_ = true;
    offer_issued_at_ = at;
  } else if (!score_) {
    score_ = compute_score(cfg_.human_target, Vec::Constant(cfg_.human_target.size(), cfg_.initial),
                           neg_->s_b().resources());
  }
}

void Session::apply(const std::string& action, const std::optional<Vec>& counter, const std::string& tag) {
  if (action == "accept") {
    neg_->respond(Response::Accept, tag);
  } else if (action == "reject") {
    neg_->respond(Response::Reject, tag);
  } else if (action == "counter") {
    neg_->counter(*counter);
  } else {
    throw ValidationError("action must be accept, reject or counter");
  }
  offer_live_ = false;
}

void Session::finish(const std::string& detail, TimePoint at, std::vector<Json>& log) {
  neg_->stop(TerminalReason::ExternalStop);
  offer_live_ = false;
  terminal_detail_ = detail;
  ensure_offer(at);
  log.push_back(stamp(Json{{"type", "end"}, {"detail", detail}, {"score", score_->raw}, {"score_clamped", score_->clamped}},
                      at));
}

void Session::tick_locked(TimePoint now, std::vector<Json>& log) {
  const TimePoint session_deadline = after(created_at_, cfg_.time_limit);
  while (!neg_->terminal()) {
    if (offer_live_) {
      const TimePoint offer_deadline = after(offer_issued_at_, cfg_.per_offer_timeout);
      if (offer_deadline <= now && offer_deadline < session_deadline) {
        log.push_back(stamp(Json{{"type", "timeout"}, {"token", token_}}, offer_deadline));
        apply("reject", std::nullopt, "timeout");
        ensure_offer(offer_deadline);
        continue;
      }
    }
    if (session_deadline <= now) finish("time_limit", session_deadline, log);
    break;
  }
  if (neg_->terminal() && !frozen_) std::atomic_store(&frozen_, std::make_shared<const Json>(snapshot_locked()));
}

Json Session::respond(std::uint64_t token, const std::string& action, const std::optional<Vec>& counter, TimePoint now) {
  std::lock_guard lock(mu_);
  std::vector<Json> log;
  tick_locked(now, log);
  emit(log);
  log.clear();
  if (neg_->terminal()) throw Conflict("session " + id_ + " has ended");
  if (token != token_) throw Conflict("stale offer token " + std::to_string(token) + "; current is " + std::to_string(token_));
  if (action != "accept" && action != "reject" && action != "counter")
    throw ValidationError("action must be accept, reject or counter");
  if (action == "counter") {
    if (!counter) throw ValidationError("counter action needs a counter vector");
    if (counter->size() != static_cast<Eigen::Index>(cfg_.categories.size()))
      throw ValidationError("counter must have one entry per category");
    if (!is_integral(*counter)) throw ValidationError("counter entries must be integers");
  }
  Json rec{{"type", "respond"}, {"token", token}, {"action", action}};
  if (action == "counter") rec["counter"] = to_json(*counter);
  const std::size_t before = neg_->transcript().events.size();
  apply(action, counter, {});
  ensure_offer(now);
  log.push_back(stamp(rec, now));
  tick_locked(now, log);
  emit(log);

  Json out = snapshot_locked();
  Json events = Json::array();
  const auto& evs = neg_->transcript().events;
  for (std::size_t i = before; i < evs.size(); ++i) events.push_back(trade::to_json(evs[i], neg_->transcript().algorithm));
  out["events"] = events;
  return out;
}

Json Session::end(TimePoint now) {
  std::lock_guard lock(mu_);
  std::vector<Json> log;
  tick_locked(now, log);
  if (!neg_->terminal()) finish("ended_by_user", now, log);
  tick_locked(now, log);
  emit(log);
  return snapshot_locked();
}

Json Session::snapshot(TimePoint now) {
  if (auto f = std::atomic_load(&frozen_)) return *f;
  std::lock_guard lock(mu_);
  std::vector<Json> log;
  tick_locked(now, log);
  emit(log);
  return snapshot_locked();
}

bool Session::terminal(TimePoint now) {
  if (std::atomic_load(&frozen_)) return true;
  std::lock_guard lock(mu_);
  std::vector<Json> log;
  tick_locked(now, log);
  emit(log);
  return neg_->terminal();
}

Json Session::header() const {
  Json h{{"session_id", id_},
         {"config", to_json(cfg_)},
         {"initial", to_json(Vec(Vec::Constant(cfg_.human_target.size(), cfg_.initial)))},
         {"human_target", to_json(cfg_.human_target)},
         {"agent_target", to_json(*cfg_.agent_target)}};
  if (score_) h["score"] = Json{{"raw", score_->raw}, {"clamped", score_->clamped}, {"degenerate", score_->degenerate}};
  return h;
}

std::string Session::transcript_jsonl(TimePoint now) {
  std::lock_guard lock(mu_);
  std::vector<Json> log;
  tick_locked(now, log);
  emit(log);
  std::ostringstream os;
  write_transcript_jsonl(os, neg_->transcript(), header());
  return os.str();
}

Json Session::snapshot_locked() const {
  const Vec& s_a = neg_->s_a().resources();
  const Vec& s_b = neg_->s_b().resources();
  Json j{{"id", id_},
         {"algorithm", *cfg_.algorithm},
         {"categories", cfg_.categories},
         {"human_target", to_json(cfg_.human_target)},
         {"agent_target", to_json(*cfg_.agent_target)},
         {"initial", cfg_.initial},
         {"S_A", to_json(s_a)},
         {"S_B", to_json(s_b)},
         {"token", token_},
         {"offers_made", neg_->offers_made()},
         {"created_at", iso8601(created_at_)},
         {"deadline_at", iso8601(after(created_at_, cfg_.time_limit))}};
  // pending() is non-const only because it may compute an offer; offer_live_
  // guarantees one already exists here.
  if (offer_live_ && !neg_->terminal()) {
    const auto& p = const_cast<Negotiation&>(*neg_).pending();
    const Vec& v = p->offer.delta();
    j["offer"] = Json{{"token", token_},
                      {"vector", to_json(v)},
                      {"agent_receives", to_json(Vec(v.cwiseMax(0.0)))},
                      {"human_receives", to_json(Vec((-v).cwiseMax(0.0)))},
                      {"stage", to_string(p->proposal.stage)},
                      {"tag", p->proposal.tag},
                      {"issued_at", iso8601(offer_issued_at_)},
                      {"expires_at", iso8601(after(offer_issued_at_, cfg_.per_offer_timeout))}};
  } else {
    j["offer"] = nullptr;
  }
  if (neg_->terminal()) {
    j["terminal"] = to_string(neg_->transcript().terminal);
    j["terminal_detail"] = terminal_detail_;
  } else {
    j["terminal"] = nullptr;
  }
  j["score"] = score_ ? Json{{"raw", score_->raw}, {"clamped", score_->clamped}, {"degenerate", score_->degenerate}}
                      : Json(nullptr);
  const Vec start = Vec::Constant(cfg_.human_target.size(), cfg_.initial);
  if (auto a = alignment_bin(*cfg_.agent_target, cfg_.human_target, start))
    j["alignment"] = Json{{"degrees", a->degrees}, {"bin", to_string(a->bin)}};
  else
    j["alignment"] = nullptr;
  return j;
}

void Session::replay(const Json& r) {
  std::lock_guard lock(mu_);
  const std::string type = r.at("type").get<std::string>();
  const TimePoint at = from_ms(r.at("at_ms").get<std::int64_t>());
  if (type == "respond") {
    std::optional<Vec> counter;
    if (r.contains("counter")) counter = vec_from_json(r["counter"]);
    apply(r.at("action").get<std::string>(), counter, {});
    ensure_offer(at);
  } else if (type == "timeout") {
    apply("reject", std::nullopt, "timeout");
    ensure_offer(at);
  } else if (type == "end") {
    std::vector<Json> ignored;
    finish(r.at("detail").get<std::string>(), at, ignored);
  } else {
    throw std::runtime_error("session " + id_ + ": unknown record type '" + type + "'");
  }
  if (neg_->terminal() && !frozen_) std::atomic_store(&frozen_, std::make_shared<const Json>(snapshot_locked()));
}

// ---------------------------------------------------------------------------

SessionService::SessionService(std::filesystem::path data_dir, Clock clock)
    : data_dir_(std::move(data_dir)), clock_(clock ? std::move(clock) : Clock([] { return std::chrono::system_clock::now(); })) {
  if (!data_dir_.empty()) std::filesystem::create_directories(data_dir_);
}

void SessionService::persist(const std::string& id, const std::vector<Json>& records) {
  if (data_dir_.empty()) return;
  std::lock_guard lock(io_mu_);
  const auto path = data_dir_ / (id + ".jsonl");
  std::ofstream f(path, std::ios::app);
  if (!f) throw std::runtime_error("cannot append to " + path.string());
  for (const auto& r : records) f << r.dump() << '\n';
  f.flush();
  if (!f) throw std::runtime_error("write failed for " + path.string());
}

Sink SessionService::sink_for(const std::string& id) {
  return [this, id](const std::vector<Json>& records) { persist(id, records); };
}

Json SessionService::create(SessionConfig cfg) {
  cfg.validate();
  std::uint64_t rotation;
  std::string id;
  {
    std::unique_lock lock(mu_);
    rotation = rotation_++;
    thread_local std::mt19937_64 rng{std::random_device{}()};
    char buf[48];
    std::snprintf(buf, sizeof buf, "s%06llu-%08llx", static_cast<unsigned long long>(rotation),
                  static_cast<unsigned long long>(rng() & 0xffffffffULL));
    id = buf;
  }
  auto s = std::make_shared<Session>(id, std::move(cfg), clock_(), rotation, sink_for(id));
  persist(id, {s->create_record()});
  {
    std::unique_lock lock(mu_);
    sessions_.emplace(id, s);
  }
  return s->snapshot(clock_());
}

std::shared_ptr<Session> SessionService::find(const std::string& id) const {
  std::shared_lock lock(mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFound("unknown session " + id);
  return it->second;
}

Json SessionService::get(const std::string& id) { return find(id)->snapshot(clock_()); }

Json SessionService::respond(const std::string& id, std::uint64_t token, const std::string& action,
                             const std::optional<Vec>& counter) {
  return find(id)->respond(token, action, counter, clock_());
}

Json SessionService::end(const std::string& id) { return find(id)->end(clock_()); }

std::string SessionService::transcript(const std::string& id) { return find(id)->transcript_jsonl(clock_()); }

std::vector<std::string> SessionService::ids() const {
  std::shared_lock lock(mu_);
  std::vector<std::string> out;
  for (const auto& [id, _] : sessions_) out.push_back(id);
  return out;
}

int SessionService::recover() {
  if (data_dir_.empty() || !std::filesystem::exists(data_dir_)) return 0;
  std::vector<std::filesystem::path> files;
  for (const auto& e : std::filesystem::directory_iterator(data_dir_))
    if (e.is_regular_file() && e.path().extension() == ".jsonl") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  int count = 0;
  for (const auto& path : files) {
    std::ifstream f(path);
    std::string line;
    std::shared_ptr<Session> s;
    std::uint64_t rotation = 0;
    int lineno = 0;
    while (std::getline(f, line)) {
      ++lineno;
      if (line.empty()) continue;
      Json r;
      try {
        r = Json::parse(line);
      } catch (const Json::exception& e) {
        // A torn final line from a crash mid-append is dropped; anything else is corruption.
        if (f.peek() == EOF) break;
        throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
      }
      if (!s) {
        if (r.value("type", "") != "create") throw std::runtime_error(path.string() + ": first record is not a create");
        rotation = r.at("rotation").get<std::uint64_t>();
        const std::string id = r.at("id").get<std::string>();
        s = std::make_shared<Session>(id, session_config_from_json(r.at("config")),
                                      from_ms(r.at("at_ms").get<std::int64_t>()), rotation);
      } else {
        s->replay(r);
      }
    }
    if (!s) continue;
    s->set_sink(sink_for(s->id()));
    std::unique_lock lock(mu_);
    rotation_ = std::max(rotation_, rotation + 1);
    sessions_[s->id()] = s;
    ++count;
  }
  return count;
}

Score score_from_transcript(const LoadedTranscript& t) {
  const Vec target = vec_from_json(t.header.at("human_target"));
  const Vec initial = vec_from_json(t.header.at("initial"));
  Vec state = initial;
  for (const auto& e : t.transcript.events) {
    state = e.s_b;
    if (e.response == Response::Accept) state -= e.offer;
  }
  return compute_score(target, initial, state);
}

}  // namespace trade::session

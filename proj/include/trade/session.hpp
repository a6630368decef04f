#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "trade/serialization.hpp"

namespace trade::session {

using TimePoint = std::chrono::system_clock::time_point;
using Clock = std::function<TimePoint()>;

struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct NotFound : std::out_of_range {
  using std::out_of_range::out_of_range;
};
struct Conflict : std::logic_error {
  using std::logic_error::logic_error;
};

const std::array<Vec, 5>& agent_target_menu();
const std::array<std::string, 3>& session_algorithms();

struct SessionConfig {
  std::vector<std::string> categories{"apples", "bananas", "oranges"};
  double initial = 50.0;
  Vec human_target;
  std::optional<Vec> agent_target;       // picked by rotation when absent
  std::optional<std::string> algorithm;  // picked by rotation when absent
  double time_limit = 600.0;             // seconds
  double per_offer_timeout = 120.0;      // seconds
  std::uint64_t seed = 0;

  void validate() const;
};

Json to_json(const SessionConfig& cfg);
SessionConfig session_config_from_json(const Json& j);

struct Score {
  double raw = 0.0;
  double clamped = 0.0;
  bool degenerate = false;
};

// 1 - |target - final|_1 / |target - initial|_1.
Score compute_score(const Vec& target, const Vec& initial, const Vec& final_state);

enum class AlignmentBin { Aligned, Oblique, Opposed };  // [0,60), [60,120), [120,180] degrees
const char* to_string(AlignmentBin b);

struct Alignment {
  double degrees = 0.0;
  AlignmentBin bin = AlignmentBin::Aligned;
};

// nullopt when either target coincides with the initial allocation.
std::optional<Alignment> alignment_bin(const Vec& agent_target, const Vec& human_target, const Vec& initial);

std::string iso8601(TimePoint t);

using Sink = std::function<void(const std::vector<Json>&)>;

/// One negotiation with a human responder. Mutations are serialized by a
/// per-session mutex; every persisted record passes through the sink while
/// that mutex is held, so the log order matches the state order.
class Session {
 public:
  Session(std::string id, SessionConfig cfg, TimePoint now, std::uint64_t rotation = 0, Sink sink = nullptr);

  const std::string& id() const { return id_; }
  const SessionConfig& config() const { return cfg_; }

  Json respond(std::uint64_t token, const std::string& action, const std::optional<Vec>& counter, TimePoint now);
  Json end(TimePoint now);
  Json snapshot(TimePoint now);
  std::string transcript_jsonl(TimePoint now);
  bool terminal(TimePoint now);

  // Re-applies a persisted record without emitting it again.
  void replay(const Json& record);
  void set_sink(Sink sink);
  Json create_record() const { return create_record_; }

 private:
  Json snapshot_locked() const;
  void ensure_offer(TimePoint at);
  void tick_locked(TimePoint now, std::vector<Json>& log);
  void apply(const std::string& action, const std::optional<Vec>& counter, const std::string& tag);
  void finish(const std::string& detail, TimePoint at, std::vector<Json>& log);
  void emit(const std::vector<Json>& log);
  Json header() const;

  std::string id_;
  SessionConfig cfg_;
  std::unique_ptr<Negotiation> neg_;
  std::uint64_t token_ = 0;
  bool offer_live_ = false;
  TimePoint created_at_, offer_issued_at_;
  std::string terminal_detail_;
  std::optional<Score> score_;
  Json create_record_;
  Sink sink_;
  std::shared_ptr<const Json> frozen_;  // snapshot published once terminal
  mutable std::mutex mu_;
};

/// Session registry with round-robin assignment and JSON-lines persistence.
class SessionService {
 public:
  // Empty data_dir disables persistence.
  explicit SessionService(std::filesystem::path data_dir = {}, Clock clock = nullptr);

  Json create(SessionConfig cfg);
  Json get(const std::string& id);
  Json respond(const std::string& id, std::uint64_t token, const std::string& action, const std::optional<Vec>& counter);
  Json end(const std::string& id);
  std::string transcript(const std::string& id);
  std::vector<std::string> ids() const;

  // Loads every persisted session; returns how many were recovered.
  int recover();

 private:
  std::shared_ptr<Session> find(const std::string& id) const;
  void persist(const std::string& id, const std::vector<Json>& records);
  Sink sink_for(const std::string& id);

  std::filesystem::path data_dir_;
  Clock clock_;
  mutable std::shared_mutex mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t rotation_ = 0;
  std::mutex io_mu_;
};

// Score recomputed from a transcript written by Session::transcript_jsonl.
Score score_from_transcript(const LoadedTranscript& t);

}  // namespace trade::session

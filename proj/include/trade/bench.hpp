#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "trade/baselines.hpp"
#include "trade/serialization.hpp"
#include "trade/stcr.hpp"

namespace trade::bench {

struct ScenarioConfig {
  int n = 3;
  double rho = 0.1;
  std::uint64_t seed = 10;
  double initial_per_category = 100.0;
  double per_category_cap = 5.0;
  Mode mode = Mode::Continuous;

  double norm_cap() const;
  void validate() const;
};

struct Scenario {
  std::shared_ptr<const QuadraticUtility> f_a, f_b;
  AgentState s_a, s_b;
  OfferLimits limits;
  std::uint64_t seed = 0;

  std::string fingerprint() const;
};

// Scenario number `index` draws from its own stream seeded by cfg.seed + index.
Scenario generate_scenario(const ScenarioConfig& cfg, int index);

enum class Algorithm { Stcr, StcrNoHeur, Random, RandomPrev, RandomMomentum, Gca };

struct AlgorithmSpec {
  Algorithm algorithm = Algorithm::Stcr;
  int gca_update_interval = 10;
  NegotiationParams stcr;

  std::string label() const;
  static AlgorithmSpec parse(const std::string& name, int gca_update_interval = 10);
};

std::unique_ptr<OfferPolicy> make_policy(const AlgorithmSpec& spec, std::uint64_t seed);
NegotiationTranscript run_scenario(const Scenario& sc, const AlgorithmSpec& spec, Mode mode, int budget);

struct CurvePoint {
  int offer_index = 0;
  double mean = 0.0;
  double normalized = 0.0;
};

struct Series {
  std::string algorithm;
  std::string benefit_kind;  // societal | offering | responding
  std::vector<CurvePoint> points;
  int n_scenarios = 0;
  std::uint64_t seed = 0;
};

struct BatchResult {
  ScenarioConfig config;
  int budget = 0;
  std::vector<std::string> algorithms;
  std::vector<Series> series;
  std::vector<std::string> scenario_fingerprints;
  // transcripts[a][s] when requested
  std::vector<std::vector<NegotiationTranscript>> transcripts;

  const Series& find(const std::string& algorithm, const std::string& kind) const;
};

int worker_count();

BatchResult run_batch(const std::vector<AlgorithmSpec>& algorithms, const ScenarioConfig& cfg, int n_scenarios,
                      int budget, bool keep_transcripts = false);

// Divides each benefit kind by its largest mean across algorithms and offers.
void normalize(std::vector<Series>& series);

enum class Format { Csv, Json };
void emit_results(const BatchResult& result, const std::filesystem::path& path, Format format);
BatchResult read_results_json(const std::filesystem::path& path);
std::vector<Series> read_results_csv(const std::filesystem::path& path);

Json to_json(const ScenarioConfig& cfg);
ScenarioConfig config_from_json(const Json& j);

}  // namespace trade::bench

#include "trade/bench.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstring>
#include <limits>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

namespace trade::bench {

double ScenarioConfig::norm_cap() const { return 5.0 * std::sqrt(static_cast<double>(n)); }

void ScenarioConfig::validate() const {
  if (n < 2) throw DomainError("scenario: n must be at least 2");
  if (!(rho >= 0.0) || !std::isfinite(rho)) throw DomainError("scenario: rho must be finite and nonnegative");
  if (!(initial_per_category >= 0.0)) throw DomainError("scenario: initial holdings must be nonnegative");
  if (!(per_category_cap > 0.0)) throw DomainError("scenario: per-category cap must be positive");
}

std::string Scenario::fingerprint() const {
  // FNV-1a over the raw bytes of every number that defines the scenario.
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](double x) {
    unsigned char bytes[sizeof(double)];
    std::memcpy(bytes, &x, sizeof(double));
    for (unsigned char b : bytes) {
      h ^= b;
      h *= 1099511628211ULL;
    }
  };
  for (const auto* f : {f_a.get(), f_b.get()}) {
    for (Eigen::Index i = 0; i < f->q().size(); ++i) mix(f->q().data()[i]);
    for (Eigen::Index i = 0; i < f->u().size(); ++i) mix(f->u()[i]);
  }
  for (int i = 0; i < s_a.dim(); ++i) mix(s_a[i]);
  for (int i = 0; i < s_b.dim(); ++i) mix(s_b[i]);
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

Scenario generate_scenario(const ScenarioConfig& cfg, int index) {
  cfg.validate();
  const int n = cfg.n;
  Scenario sc;
  sc.seed = cfg.seed + static_cast<std::uint64_t>(index);
  Rng rng(sc.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<int> lin(1, 200);

  auto draw_q = [&] {
    Mat m(n, n);
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c) m(r, c) = unit(rng);
    return Mat(-(m * m.transpose()));
  };
  auto draw_u = [&] {
    Vec u(n);
    for (int i = 0; i < n; ++i) u[i] = lin(rng);
    return u;
  };
  const Mat q_a = draw_q();
  const Mat q_b = draw_q();
  const Vec u_a = draw_u();
  const Vec u_b = draw_u();

  const double own = cfg.rho + 1.0, den = cfg.rho + 2.0;
  sc.f_a = std::make_shared<QuadraticUtility>((own * q_a + q_b) / den, (own * u_a + u_b) / den);
  sc.f_b = std::make_shared<QuadraticUtility>((q_a + own * q_b) / den, (u_a + own * u_b) / den);
  sc.s_a = AgentState(Vec::Constant(n, cfg.initial_per_category));
  sc.s_b = AgentState(Vec::Constant(n, cfg.initial_per_category));
  sc.limits = OfferLimits{cfg.norm_cap(), cfg.per_category_cap};
  return sc;
}

namespace {

constexpr std::pair<Algorithm, const char*> kAlgorithmNames[] = {
    {Algorithm::Stcr, "stcr"},     {Algorithm::StcrNoHeur, "stcr-noheur"},         {Algorithm::Random, "random"},
    {Algorithm::RandomPrev, "random-prev"}, {Algorithm::RandomMomentum, "random-momentum"}, {Algorithm::Gca, "gca"},
};

// Per-algorithm salt so that policies on the same scenario draw from unrelated streams.
std::uint64_t policy_seed(std::uint64_t scenario_seed, Algorithm a) {
  std::seed_seq seq{static_cast<std::uint32_t>(scenario_seed), static_cast<std::uint32_t>(scenario_seed >> 32),
                    static_cast<std::uint32_t>(a), 0x7a11u};
  std::uint32_t out[2];
  seq.generate(out, out + 2);
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace

std::string AlgorithmSpec::label() const {
  for (const auto& [a, s] : kAlgorithmNames)
    if (a == algorithm) return s;
  return "unknown";
}

AlgorithmSpec AlgorithmSpec::parse(const std::string& name, int gca_update_interval) {
  for (const auto& [a, s] : kAlgorithmNames) {
    if (name == s) {
      AlgorithmSpec spec;
      spec.algorithm = a;
      spec.gca_update_interval = gca_update_interval;
      spec.stcr.use_prev_trade_heuristic = a != Algorithm::StcrNoHeur;
      return spec;
    }
  }
  throw DomainError("unknown algorithm '" + name + "'");
}

std::unique_ptr<OfferPolicy> make_policy(const AlgorithmSpec& spec, std::uint64_t seed) {
  switch (spec.algorithm) {
    case Algorithm::Stcr:
    case Algorithm::StcrNoHeur: {
      NegotiationParams p = spec.stcr;
      p.use_prev_trade_heuristic = spec.algorithm == Algorithm::Stcr;
      return std::make_unique<StcrPolicy>(p);
    }
    case Algorithm::Random: return std::make_unique<RandomPolicy>(seed, false);
    case Algorithm::RandomPrev: return std::make_unique<RandomPolicy>(seed, true);
    case Algorithm::RandomMomentum: return std::make_unique<MomentumPolicy>(seed);
    case Algorithm::Gca: {
      GcaPolicy::Options o;
      o.update_interval = spec.gca_update_interval;
      return std::make_unique<GcaPolicy>(seed, o);
    }
  }
  throw DomainError("make_policy: unhandled algorithm");
}

NegotiationTranscript run_scenario(const Scenario& sc, const AlgorithmSpec& spec, Mode mode, int budget) {
  auto policy = make_policy(spec, policy_seed(sc.seed, spec.algorithm));
  return run_negotiation(sc.s_a, sc.s_b, sc.f_a, sc.limits, mode, std::move(policy), greedy_responder(sc.f_b), budget,
                         sc.f_b);
}

const Series& BatchResult::find(const std::string& algorithm, const std::string& kind) const {
  for (const auto& s : series)
    if (s.algorithm == algorithm && s.benefit_kind == kind) return s;
  throw std::out_of_range("no series for " + algorithm + "/" + kind);
}

int worker_count() {
  int n = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  if (const char* env = std::getenv("TRADE_THREADS")) {
    const int cap = std::atoi(env);
    if (cap > 0) n = std::min(n, cap);
  }
  return n;
}

namespace {

constexpr const char* kKinds[] = {"societal", "offering", "responding"};

double pick(const BenefitRecord& b, int kind) {
  switch (kind) {
    case 0: return b.societal();
    case 1: return b.offering;
    default: return b.responding;
  }
}

template <class F>
void parallel_for(int count, F&& body) {
  const int workers = std::min(worker_count(), std::max(count, 1));
  if (workers <= 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<int> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (int i = next++; i < count; i = next++) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      }
    });
  }
  for (auto& t : pool) t.join();
  if (failure) std::rethrow_exception(failure);
}

}  // namespace

BatchResult run_batch(const std::vector<AlgorithmSpec>& algorithms, const ScenarioConfig& cfg, int n_scenarios,
                      int budget, bool keep_transcripts) {
  if (n_scenarios < 0) throw DomainError("run_batch: scenario count must be nonnegative");
  if (budget < 1) throw DomainError("run_batch: budget must be positive");
  BatchResult out;
  out.config = cfg;
  out.budget = budget;

  std::vector<Scenario> scenarios;
  scenarios.reserve(static_cast<std::size_t>(n_scenarios));
  for (int s = 0; s < n_scenarios; ++s) {
    scenarios.push_back(generate_scenario(cfg, s));
    out.scenario_fingerprints.push_back(scenarios.back().fingerprint());
  }

  const int n_alg = static_cast<int>(algorithms.size());
  // curves[a][s][offer] cumulative benefit, padded with the final value past termination
  std::vector<std::vector<std::vector<BenefitRecord>>> curves(
      static_cast<std::size_t>(n_alg), std::vector<std::vector<BenefitRecord>>(static_cast<std::size_t>(n_scenarios)));
  if (keep_transcripts)
    out.transcripts.assign(static_cast<std::size_t>(n_alg),
                           std::vector<NegotiationTranscript>(static_cast<std::size_t>(n_scenarios)));

  parallel_for(n_alg * n_scenarios, [&](int job) {
    const int a = job / std::max(n_scenarios, 1), s = job % std::max(n_scenarios, 1);
    auto t = run_scenario(scenarios[static_cast<std::size_t>(s)], algorithms[static_cast<std::size_t>(a)], cfg.mode,
                          budget);
    auto cum = t.cumulative();
    const BenefitRecord last = cum.empty() ? BenefitRecord{} : cum.back();
    cum.resize(static_cast<std::size_t>(budget), last);
    curves[static_cast<std::size_t>(a)][static_cast<std::size_t>(s)] = std::move(cum);
    if (keep_transcripts) out.transcripts[static_cast<std::size_t>(a)][static_cast<std::size_t>(s)] = std::move(t);
  });

  for (int a = 0; a < n_alg; ++a) {
    out.algorithms.push_back(algorithms[static_cast<std::size_t>(a)].label());
    for (int kind = 0; kind < 3; ++kind) {
      Series series;
      series.algorithm = out.algorithms.back();
      series.benefit_kind = kKinds[kind];
      series.n_scenarios = n_scenarios;
      series.seed = cfg.seed;
      if (n_scenarios > 0) {
        for (int k = 0; k < budget; ++k) {
          // Reduce in scenario order so results do not depend on thread timing.
          double sum = 0.0;
          for (int s = 0; s < n_scenarios; ++s)
            sum += pick(curves[static_cast<std::size_t>(a)][static_cast<std::size_t>(s)][static_cast<std::size_t>(k)],
                        kind);
          series.points.push_back(CurvePoint{k + 1, sum / n_scenarios, 0.0});
        }
      }
      out.series.push_back(std::move(series));
    }
  }
  normalize(out.series);
  return out;
}

void normalize(std::vector<Series>& series) {
  for (const char* kind : kKinds) {
    double max = -std::numeric_limits<double>::infinity(), max_abs = 0.0;
    for (const auto& s : series) {
      if (s.benefit_kind != kind) continue;
      for (const auto& p : s.points) {
        max = std::max(max, p.mean);
        max_abs = std::max(max_abs, std::abs(p.mean));
      }
    }
    const double scale = max > 0.0 ? max : max_abs;
    for (auto& s : series) {
      if (s.benefit_kind != kind) continue;
      for (auto& p : s.points) p.normalized = scale > 0.0 ? p.mean / scale : 0.0;
    }
  }
}

Json to_json(const ScenarioConfig& cfg) {
  return Json{{"n", cfg.n},
              {"rho", cfg.rho},
              {"seed", cfg.seed},
              {"initial_per_category", cfg.initial_per_category},
              {"norm_cap", cfg.norm_cap()},
              {"per_category_cap", cfg.per_category_cap},
              {"mode", to_string(cfg.mode)}};
}

ScenarioConfig config_from_json(const Json& j) {
  ScenarioConfig cfg;
  cfg.n = j.at("n").get<int>();
  cfg.rho = j.at("rho").get<double>();
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.initial_per_category = j.at("initial_per_category").get<double>();
  cfg.per_category_cap = j.at("per_category_cap").get<double>();
  cfg.mode = mode_from_string(j.at("mode").get<std::string>());
  return cfg;
}

namespace {

std::ofstream open_for_write(const std::filesystem::path& path) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw std::runtime_error("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  }
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for writing");
  return f;
}

std::ifstream open_for_read(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path.string() + " for reading");
  return f;
}

constexpr const char* kCsvHeader = "algorithm,benefit_kind,offer_index,mean,normalized,n_scenarios,seed";

}  // namespace

void emit_results(const BatchResult& result, const std::filesystem::path& path, Format format) {
  auto f = open_for_write(path);
  if (format == Format::Csv) {
    f << kCsvHeader << '\n';
    f << std::setprecision(17);
    for (const auto& s : result.series)
      for (const auto& p : s.points)
        f << s.algorithm << ',' << s.benefit_kind << ',' << p.offer_index << ',' << p.mean << ',' << p.normalized << ','
          << s.n_scenarios << ',' << s.seed << '\n';
  } else {
    Json series = Json::array();
    for (const auto& s : result.series) {
      Json pts = Json::array();
      for (const auto& p : s.points) pts.push_back(Json{{"offer_index", p.offer_index}, {"mean", p.mean}, {"normalized", p.normalized}});
      series.push_back(Json{{"algorithm", s.algorithm},
                            {"benefit_kind", s.benefit_kind},
                            {"n_scenarios", s.n_scenarios},
                            {"seed", s.seed},
                            {"points", pts}});
    }
    Json doc{{"config", to_json(result.config)},
             {"budget", result.budget},
             {"algorithms", result.algorithms},
             {"scenario_fingerprints", result.scenario_fingerprints},
             {"series", series}};
    f << doc.dump(1) << '\n';
  }
  if (!f) throw std::runtime_error("write failed for " + path.string());
}

BatchResult read_results_json(const std::filesystem::path& path) {
  auto f = open_for_read(path);
  Json doc;
  try {
    doc = Json::parse(f);
  } catch (const Json::exception& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
  BatchResult out;
  out.config = config_from_json(doc.at("config"));
  out.budget = doc.at("budget").get<int>();
  out.algorithms = doc.at("algorithms").get<std::vector<std::string>>();
  out.scenario_fingerprints = doc.at("scenario_fingerprints").get<std::vector<std::string>>();
  for (const auto& js : doc.at("series")) {
    Series s;
    s.algorithm = js.at("algorithm").get<std::string>();
    s.benefit_kind = js.at("benefit_kind").get<std::string>();
    s.n_scenarios = js.at("n_scenarios").get<int>();
    s.seed = js.at("seed").get<std::uint64_t>();
    for (const auto& jp : js.at("points"))
      s.points.push_back(CurvePoint{jp.at("offer_index").get<int>(), jp.at("mean").get<double>(),
                                    jp.at("normalized").get<double>()});
    out.series.push_back(std::move(s));
  }
  return out;
}

std::vector<Series> read_results_csv(const std::filesystem::path& path) {
  auto f = open_for_read(path);
  std::string line;
  if (!std::getline(f, line) || line != kCsvHeader) throw std::runtime_error(path.string() + ": missing CSV header");
  std::vector<Series> out;
  int lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    for (std::string c; std::getline(ss, c, ',');) cols.push_back(c);
    if (cols.size() != 7) throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": expected 7 columns");
    if (out.empty() || out.back().algorithm != cols[0] || out.back().benefit_kind != cols[1]) {
      Series s;
      s.algorithm = cols[0];
      s.benefit_kind = cols[1];
      s.n_scenarios = std::stoi(cols[5]);
      s.seed = std::stoull(cols[6]);
      out.push_back(std::move(s));
    }
    out.back().points.push_back(CurvePoint{std::stoi(cols[2]), std::stod(cols[3]), std::stod(cols[4])});
  }
  return out;
}

}  // namespace trade::bench

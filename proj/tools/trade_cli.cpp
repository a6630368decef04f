#include <chrono>
#include <cmath>
#include <csignal>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "trade/bench.hpp"
#include "trade/http_api.hpp"
#include "trade/theory.hpp"

namespace {

using namespace trade;

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string part; std::getline(ss, part, sep);)
    if (!part.empty()) out.push_back(part);
  return out;
}

Json scenario_header(const bench::Scenario& sc, const bench::ScenarioConfig& cfg, int index) {
  return Json{{"scenario_index", index},
              {"scenario_seed", sc.seed},
              {"fingerprint", sc.fingerprint()},
              {"config", bench::to_json(cfg)},
              {"f_a", to_json(*sc.f_a)},
              {"f_b", to_json(*sc.f_b)},
              {"limits", to_json(sc.limits)}};
}

struct BenchArgs {
  std::string algos = "stcr,random";
  int n = 3;
  double rho = 0.1;
  int scenarios = 100;
  int budget = 200;
  std::string mode = "continuous";
  std::uint64_t seed = 10;
  int gca_update_interval = 10;
  std::string out = "results";
  bool save_transcripts = false;
};

int run_bench(const BenchArgs& a) {
  bench::ScenarioConfig cfg;
  cfg.n = a.n;
  cfg.rho = a.rho;
  cfg.seed = a.seed;
  cfg.mode = mode_from_string(a.mode);
  std::vector<bench::AlgorithmSpec> specs;
  for (const auto& name : split(a.algos, ',')) specs.push_back(bench::AlgorithmSpec::parse(name, a.gca_update_interval));
  if (specs.empty()) throw DomainError("no algorithms given");

  const auto t0 = std::chrono::steady_clock::now();
  const auto result = bench::run_batch(specs, cfg, a.scenarios, a.budget, a.save_transcripts);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const std::filesystem::path out(a.out);
  bench::emit_results(result, out / "curves.csv", bench::Format::Csv);
  bench::emit_results(result, out / "curves.json", bench::Format::Json);
  if (a.save_transcripts) {
    std::filesystem::create_directories(out / "transcripts");
    for (std::size_t i = 0; i < specs.size(); ++i) {
      for (int s = 0; s < a.scenarios; ++s) {
        const auto sc = bench::generate_scenario(cfg, s);
        const auto path = out / "transcripts" / (result.algorithms[i] + "_" + std::to_string(s) + ".jsonl");
        std::ofstream f(path);
        if (!f) throw std::runtime_error("cannot write " + path.string());
        write_transcript_jsonl(f, result.transcripts[i][static_cast<std::size_t>(s)], scenario_header(sc, cfg, s));
      }
    }
  }

  std::cout << "algorithm,societal@end,offering@end,responding@end\n";
  for (const auto& alg : result.algorithms) {
    std::cout << alg;
    for (const char* kind : {"societal", "offering", "responding"}) {
      const auto& pts = result.find(alg, kind).points;
      std::cout << ',' << (pts.empty() ? 0.0 : pts.back().mean);
    }
    std::cout << '\n';
  }
  std::cerr << "ran " << specs.size() << " x " << a.scenarios << " negotiations in " << secs << " s with "
            << bench::worker_count() << " worker(s); wrote " << (out / "curves.csv").string() << '\n';
  return 0;
}

struct KappaArgs {
  int n = 3;
  std::vector<int> k;
  double d = 0.0, beta = 0.0, lipschitz = 0.0, delta = 0.0;
  std::string exponent = "k-n";
  double coefficient = 2.0;
};

int run_kappa(const KappaArgs& a) {
  theory::KappaOptions opts;
  opts.coefficient = a.coefficient;
  if (a.exponent == "k-1")
    opts.exponent = theory::ExponentForm::KMinusOne;
  else if (a.exponent != "k-n")
    throw DomainError("exponent must be k-n or k-1");
  std::vector<int> ks = a.k;
  if (ks.empty())
    for (int k = a.n; k <= 10 * a.n; ++k) ks.push_back(k);
  std::cout << "n,k,kappa,residual,angle_bound,eps_case1,eps_case2\n";
  std::cout << std::setprecision(12);
  for (int k : ks) {
    const double kappa = theory::solve_kappa(a.n, k, opts);
    const double residual = std::abs(theory::kappa_lhs(a.n, k, opts) - theory::kappa_rhs(a.n, kappa, opts));
    theory::TheoryParams p{a.n, k, a.d, a.beta, a.lipschitz, a.delta, kappa};
    const auto e1 = theory::epsilon_bounds(p, 1);
    const auto e2 = theory::epsilon_bounds(p, 2);
    std::cout << a.n << ',' << k << ',' << kappa << ',' << residual << ',' << theory::angle_bound(a.n, k, opts.exponent)
              << ',';
    if (e1.vacuous)
      std::cout << "vacuous";
    else
      std::cout << e1.epsilon;
    std::cout << ',' << e2.epsilon << '\n';
  }
  return 0;
}

int run_certify(const std::string& path, const std::string& eps_arg, double grid_step) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open " + path);
  const auto loaded = read_transcript_jsonl(f);
  const auto& h = loaded.header;
  if (!h.contains("f_a") || !h.contains("f_b") || !h.contains("limits"))
    throw DomainError(path + ": header lacks f_a, f_b or limits");
  const auto f_a = utility_from_json(h["f_a"]);
  const auto f_b = utility_from_json(h["f_b"]);
  const auto limits = limits_from_json(h["limits"]);
  const auto& events = loaded.transcript.events;
  if (events.empty()) throw DomainError(path + ": transcript has no offers");
  Vec s_a = events.back().s_a, s_b = events.back().s_b;
  if (events.back().response == Response::Accept) {
    s_a += events.back().offer;
    s_b -= events.back().offer;
  }

  const int n = static_cast<int>(s_a.size());
  const int k = loaded.transcript.trailing_rejections();
  const double beta = std::max(f_a.smoothness(), f_b.smoothness());
  Json report{{"n", n}, {"trailing_rejections", k}, {"beta", beta}, {"d", limits.norm_cap}};
  double eps;
  if (eps_arg == "auto") {
    const int k_used = std::max(k, n);
    const double kappa = theory::solve_kappa(n, k_used);
    eps = theory::epsilon_bounds({n, k_used, limits.norm_cap, beta, 0.0, limits.norm_cap, kappa}, 2).epsilon;
    report["kappa"] = kappa;
    if (k < n) report["note"] = "fewer than n trailing rejections; bound evaluated at k = n";
  } else {
    eps = std::stod(eps_arg);
  }
  report["eps"] = eps;
  const auto res = theory::pareto_certify(AgentState(s_a), AgentState(s_b), f_a, f_b, eps, limits, grid_step);
  report["certified"] = res.certified;
  report["points_checked"] = res.points_checked;
  if (res.witness) {
    report["witness"] = to_json(*res.witness);
    report["witness_offering"] = res.witness_offering;
    report["witness_responding"] = res.witness_responding;
  }
  std::cout << report.dump(2) << '\n';
  return res.certified ? 0 : 1;
}

session::ApiServer* g_server = nullptr;

int run_serve(const std::string& host, int port, const std::string& data_dir) {
  session::SessionService service(data_dir);
  const int recovered = service.recover();
  session::ApiServer server(service);
  g_server = &server;
  std::signal(SIGINT, [](int) {
    if (g_server) g_server->stop();
  });
  std::signal(SIGTERM, [](int) {
    if (g_server) g_server->stop();
  });
  std::cerr << "recovered " << recovered << " session(s); listening on " << host << ':' << port << '\n';
  const bool ok = server.listen(host, port);
  g_server = nullptr;
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sequential multi-issue trading: benchmarks, theory tables, certification and the session server"};
  app.require_subcommand(1);

  BenchArgs bench_args;
  auto* bench_cmd = app.add_subcommand("bench", "Run an offer-benefit benchmark batch");
  bench_cmd->add_option("--algo", bench_args.algos,
                        "Comma-separated: stcr, stcr-noheur, random, random-prev, random-momentum, gca");
  bench_cmd->add_option("--n", bench_args.n, "Number of categories")->check(CLI::Range(2, 64));
  bench_cmd->add_option("--rho", bench_args.rho, "Mixing constant")->check(CLI::NonNegativeNumber);
  bench_cmd->add_option("--scenarios", bench_args.scenarios, "Number of scenarios")->check(CLI::NonNegativeNumber);
  bench_cmd->add_option("--budget", bench_args.budget, "Offers per negotiation")->check(CLI::PositiveNumber);
  bench_cmd->add_option("--mode", bench_args.mode, "continuous or discrete")
      ->check(CLI::IsMember({"continuous", "discrete"}));
  bench_cmd->add_option("--seed", bench_args.seed, "Base scenario seed");
  bench_cmd->add_option("--gca-update-interval", bench_args.gca_update_interval, "Offers between belief updates")
      ->check(CLI::PositiveNumber);
  bench_cmd->add_option("--out", bench_args.out, "Output directory");
  bench_cmd->add_flag("--save-transcripts", bench_args.save_transcripts, "Also write every transcript as JSON lines");

  KappaArgs kappa_args;
  auto* kappa_cmd = app.add_subcommand("kappa", "Tabulate kappa, the angle bound and epsilon as CSV");
  kappa_cmd->add_option("--n", kappa_args.n, "Number of categories")->check(CLI::Range(2, 1000));
  kappa_cmd->add_option("--k", kappa_args.k, "Rejected-offer counts (default n..10n)");
  kappa_cmd->add_option("--d", kappa_args.d, "Offer norm bound");
  kappa_cmd->add_option("--beta", kappa_args.beta, "Smoothness constant");
  kappa_cmd->add_option("--lipschitz", kappa_args.lipschitz, "Lipschitz constant");
  kappa_cmd->add_option("--delta", kappa_args.delta, "Largest feasible trade magnitude");
  kappa_cmd->add_option("--exponent", kappa_args.exponent, "k-n (default) or k-1");
  kappa_cmd->add_option("--coefficient", kappa_args.coefficient, "Right-hand-side coefficient of n");

  std::string transcript_path, eps_arg = "auto";
  double grid_step = 1.0;
  auto* certify_cmd = app.add_subcommand("certify", "Check a transcript's final state for weak Pareto optimality");
  certify_cmd->add_option("--transcript", transcript_path, "Transcript JSON-lines file")->required();
  certify_cmd->add_option("--eps", eps_arg, "Tolerance, or auto for the theoretical bound");
  certify_cmd->add_option("--grid-step", grid_step, "Grid spacing")->check(CLI::PositiveNumber);

  std::string host = "127.0.0.1", data_dir = "sessions";
  int port = 8080;
  auto* serve_cmd = app.add_subcommand("serve", "Serve the negotiation session HTTP API");
  serve_cmd->add_option("--host", host, "Bind address");
  serve_cmd->add_option("--port", port, "Port")->check(CLI::Range(1, 65535));
  serve_cmd->add_option("--data-dir", data_dir, "Directory for session logs");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*bench_cmd) return run_bench(bench_args);
    if (*kappa_cmd) return run_kappa(kappa_args);
    if (*certify_cmd) return run_certify(transcript_path, eps_arg, grid_step);
    if (*serve_cmd) return run_serve(host, port, data_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "isotower/acceptance.hpp"
#include "isotower/error.hpp"
#include "isotower/runner.hpp"

using namespace isotower;

namespace {

constexpr int kExitPass = 0;
constexpr int kExitFailure = 1;
constexpr int kExitConfig = 2;

struct Flags {
  std::string config;
  std::uint64_t seed = 1;
  std::string mode = "COEFF";
  int nmax = 64;
  int L = 0;
  std::string out = "isotower_out";
  int k_min = 1, k_max = 1;
  bool full = false;
  bool oracle = false;
  bool timing = false;
  double tol = kDefaultSecularTol;
  double eps = 0.1;
  int size = 1;
  int threads = 1;
  int checkpoint_from = 16;
  std::string resume;
};

void add_common(CLI::App* app, Flags& f) {
  app->add_option("--config", f.config, "JSON run configuration; flags given explicitly override it");
  app->add_option("--seed", f.seed, "base seed");
  app->add_option("--mode", f.mode, "MATRIX or COEFF")->transform(CLI::IsMember({"MATRIX", "COEFF"}, CLI::ignore_case));
  app->add_option("--nmax", f.nmax, "largest dimension");
  app->add_option("--L", f.L, "tracked eigenvector coordinates (0..64)");
  app->add_option("--out", f.out, "output directory (ISOTOWER_OUT overrides)");
  app->add_option("--k-min", f.k_min, "first tracked eigenpath index");
  app->add_option("--k-max", f.k_max, "last tracked eigenpath index");
  app->add_flag("--full", f.full, "carry the full eigenbasis in COEFF mode");
  app->add_option("--secular-tol", f.tol, "root tolerance");
  app->add_option("--eps", f.eps, "exponent slack of the event flags");
  app->add_option("--threads", f.threads, "worker threads");
}

RunConfig make_config(const CLI::App* app, const Flags& f) {
  RunConfig c;
  if (!f.config.empty()) {
    std::ifstream in(f.config);
    if (!in) fail(ErrorCode::ConfigError, "cannot read " + f.config);
    std::stringstream ss;
    ss << in.rdbuf();
    c = RunConfig::from_json(ss.str());
  }
  auto given = [app](const char* name) {
    const CLI::Option* o = app->get_option_no_throw(name);
    return o && o->count() > 0;
  };
  if (given("--seed")) c.seed = f.seed;
  if (given("--mode")) c.mode = sim_mode_from_string(f.mode);
  if (given("--nmax")) c.n_max = f.nmax;
  if (given("--L")) c.L = f.L;
  if (given("--out")) c.out_dir = f.out;
  if (given("--k-min")) c.k_min = f.k_min;
  if (given("--k-max")) c.k_max = f.k_max;
  if (given("--full")) c.full_vectors = f.full;
  if (given("--secular-tol")) c.secular_tol = f.tol;
  if (given("--eps")) c.eps = f.eps;
  if (given("--threads")) c.threads = f.threads;
  if (given("--oracle")) c.oracle = f.oracle;
  if (given("--timing")) c.record_timing = f.timing;
  if (given("--size")) c.ensemble = f.size;
  if (given("--checkpoint-from")) c.checkpoint_from = f.checkpoint_from;
  if (given("--resume")) c.resume = f.resume;
  c.validate();
  return c;
}

void progress_line(const std::string& s) { std::fprintf(stderr, "%s\n", s.c_str()); }

std::vector<int> parse_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(std::stoi(item));
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spectral recursion for virtual isometries: simulation, statistics and acceptance checks"};
  app.require_subcommand(1);
  Flags f;

  auto* sim = app.add_subcommand("simulate", "one trajectory as JSONL with checkpoints at powers of two");
  add_common(sim, f);
  sim->add_flag("--oracle", f.oracle, "compare every step with a dense eigensolver (MATRIX mode)");
  sim->add_flag("--timing", f.timing, "record wall time per row");
  sim->add_option("--checkpoint-from", f.checkpoint_from, "first power of two that is checkpointed");
  sim->add_option("--resume", f.resume, "continue from a checkpoint file");

  auto* ens = app.add_subcommand("ensemble", "many seeds, merged statistics as CSV/JSON");
  add_common(ens, f);
  ens->add_option("--size", f.size, "number of seeds");

  auto* stats = app.add_subcommand("stats", "spectral statistics of an ensemble (defaults: n = 16, 10^4 seeds)");
  add_common(stats, f);
  stats->add_option("--size", f.size, "number of seeds");

  std::string snapshots = "64,128,256,512", alphas = "0,0.5", ks = "1";
  int flow_N = 1024;
  auto* flow = app.add_subcommand("flow", "flow residual table for u_n^{floor(alpha n)} against the limit phases");
  add_common(flow, f);
  flow->add_option("--size", f.size, "number of seeds");
  flow->add_option("--snapshots", snapshots, "comma separated dimensions");
  flow->add_option("--N", flow_N, "dimension supplying g_k[n]");
  flow->add_option("--alpha", alphas, "comma separated alpha values");
  flow->add_option("--k", ks, "comma separated path indices");

  bool quick = false;
  std::string only;
  double verify_tol = 0.0;
  int verify_threads = 1;
  auto* verify = app.add_subcommand("verify", "acceptance suite; exit 0 iff every criterion passes");
  verify->add_flag("--quick", quick, "skip the long-running criteria");
  verify->add_option("--only", only, "comma separated criterion ids");
  verify->add_option("--secular-tol", verify_tol, "override the root tolerance everywhere");
  verify->add_option("--threads", verify_threads, "worker threads");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitPass : kExitConfig;
  }

  try {
    if (*sim) {
      const RunConfig cfg = make_config(sim, f);
      const TrajectorySummary s = run_trajectory(cfg, progress_line);
      std::printf("%s n=%d digest=%s oracle_failures=%d\n", s.jsonl_path.c_str(), s.n_final,
                  hex64(s.final_digest).c_str(), s.oracle_failures);
      return s.oracle_failures == 0 ? kExitPass : kExitFailure;
    }
    if (*ens || *stats) {
      CLI::App* sub = *ens ? ens : stats;
      RunConfig cfg = make_config(sub, f);
      if (*stats) {
        if (!sub->get_option("--nmax")->count() && f.config.empty()) cfg.n_max = 16;
        if (!sub->get_option("--size")->count() && f.config.empty()) cfg.ensemble = 10000;
        cfg.validate();
      }
      const EnsembleSummary s = run_ensemble(cfg, progress_line);
      for (const auto& row : s.trace)
        std::printf("E|tr u^%d|^2 = %.4f +- %.4f (exact %.0f)\n", row.j, row.mean, row.sigma, row.target);
      if (s.has_delocalization)
        std::printf("delocalization KS p = %.4f\n", s.delocalization.p_value);
      for (const auto& file : s.files) std::printf("%s\n", file.c_str());
      std::printf("completed %ld, failed %zu\n", s.completed, s.failed.size());
      return s.failed.empty() ? kExitPass : kExitFailure;
    }
    if (*flow) {
      RunConfig cfg = make_config(flow, f);
      if (!flow->get_option("--size")->count() && f.config.empty()) cfg.ensemble = 1;
      FlowStudyOptions opt;
      opt.snapshots = parse_list(snapshots);
      opt.N = flow_N;
      opt.ks = parse_list(ks);
      opt.alphas.clear();
      std::stringstream ss(alphas);
      for (std::string item; std::getline(ss, item, ',');)
        if (!item.empty()) opt.alphas.push_back(std::stod(item));
      opt.secular_tol = cfg.secular_tol;
      const auto rows = run_flow(cfg, opt, progress_line);
      std::printf("%zu residual rows written to %s/flow_residuals.csv\n", rows.size(),
                  resolve_out_dir(cfg.out_dir).c_str());
      return kExitPass;
    }
    if (*verify) {
      AcceptanceOptions opt;
      opt.quick = quick;
      opt.only = parse_list(only);
      for (int id : opt.only)
        if (id < 1 || id > kCriterionCount) fail(ErrorCode::ConfigError, "no criterion " + std::to_string(id));
      if (verify->get_option("--secular-tol")->count()) {
        if (!(verify_tol > 0.0)) fail(ErrorCode::ConfigError, "tolerance must be positive");
        opt.secular_tol = verify_tol;
      }
      opt.threads = std::max(1, verify_threads);
      bool all = true;
      run_acceptance(opt, [&](const CriterionResult& r) {
        all = all && r.passed;
        std::printf("%s\n", format_result(r).c_str());
        std::fflush(stdout);
      });
      std::printf("%s\n", all ? "ALL PASS" : "FAILURES PRESENT");
      return all ? kExitPass : kExitFailure;
    }
  } catch (const Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return e.code() == ErrorCode::ConfigError ? kExitConfig : kExitFailure;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return kExitConfig;
  }
  return kExitConfig;
}

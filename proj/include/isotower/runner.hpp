#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "isotower/simulation.hpp"

namespace isotower {

const char* build_id();

struct RunConfig {
  std::uint64_t seed = 1;
  SimMode mode = SimMode::Coeff;
  int n_max = 64;
  int k_min = 1;               // tracked eigenpaths: k_min..k_max
  int k_max = 1;
  int L = 0;                   // tracked coordinates; > 0 selects COORDS in COEFF mode
  bool full_vectors = false;   // COEFF mode: carry the full eigenbasis
  double secular_tol = kDefaultSecularTol;
  double ortho_tol = 1e-10;    // FULL mode orthonormality defect allowed at milestones
  double eps = 0.1;            // exponent slack of the event flags
  std::string out_dir = "isotower_out";
  int ensemble = 1;
  int threads = 1;
  bool oracle = false;
  bool record_timing = false;  // per-row wall time; off keeps reruns byte-identical
  int checkpoint_from = 16;    // first power of two that gets a checkpoint
  std::string resume;          // checkpoint file to continue from

  void validate() const;       // ConfigError on violated invariants
  std::vector<int> ks() const;
  VecMode vec_mode() const;
  TrajectoryOptions trajectory_options(std::uint64_t seed_value) const;
  std::string to_json() const;
  static RunConfig from_json(const std::string& text);
  // FNV-1a over the canonical JSON, excluding fields that do not change results.
  std::uint64_t hash() const;
};

std::string hex64(std::uint64_t v);
std::uint64_t fnv1a(const void* data, size_t bytes, std::uint64_t h = 0xcbf29ce484222325ULL);
std::uint64_t angles_digest(const std::vector<double>& angles);

// Honors ISOTOWER_OUT when set.
std::string resolve_out_dir(const std::string& configured);

std::string checkpoint_to_json(const Checkpoint& cp, const RunConfig& cfg);
Checkpoint checkpoint_from_json(const std::string& text);

struct TrajectorySummary {
  std::string jsonl_path;
  std::vector<std::string> checkpoints;
  int n_final = 0;
  std::uint64_t final_digest = 0;
  int oracle_failures = 0;
};

// Writes <out>/trajectory_<seed>.jsonl (meta line, then one row per dimension) and
// checkpoints <out>/checkpoint_<seed>_<n>.json at n = 2^m >= checkpoint_from. With
// cfg.resume set, rows past the checkpoint are dropped and the run continues from it.
TrajectorySummary run_trajectory(const RunConfig& cfg, const std::function<void(const std::string&)>& progress = {});

struct FailedSeed {
  std::uint64_t seed = 0;
  std::string code;
  std::string message;
};

struct EnsembleSummary {
  long completed = 0;
  std::vector<FailedSeed> failed;
  std::vector<std::string> files;
  std::vector<TraceMomentRow> trace;
  bool has_histogram = false;
  CorrelationHistogram histogram;
  bool has_delocalization = false;
  KsResult delocalization;
  int event_violations_e3_lower = 0;
};

// Seeds cfg.seed .. cfg.seed + ensemble - 1 over cfg.threads workers; partial results merge in
// seed order so the output does not depend on the thread count.
EnsembleSummary run_ensemble(const RunConfig& cfg, const std::function<void(const std::string&)>& progress = {});

struct FlowRow {
  std::uint64_t seed = 0;
  int n = 0;
  int k = 0;
  double alpha = 0.0;
  double residual = 0.0;
  double normalized_residual = 0.0;
};

struct FlowStudyOptions {
  std::vector<int> snapshots{64, 128, 256, 512};
  int N = 1024;                       // dimension whose eigenvector supplies g_k[n]
  std::vector<double> alphas{0.0, 0.5};
  std::vector<int> ks{1};
  double secular_tol = kDefaultSecularTol;
};

// For each snapshot n: g_k[n] = first n coordinates of D_k^{(N)} f_k^{(N)}, residual of
// u_n^{floor(alpha n)} g_k[n] against e^{2 pi i alpha y_k(n)} g_k[n] in the eigenbasis of u_n.
std::vector<FlowRow> flow_study(std::uint64_t seed, const FlowStudyOptions& opt);

// Runs flow_study over cfg's seeds and writes <out>/flow_residuals.csv.
std::vector<FlowRow> run_flow(const RunConfig& cfg, const FlowStudyOptions& opt,
                              const std::function<void(const std::string&)>& progress = {});

// Runs fn(i) for i in [0, count) on up to `threads` workers.
void parallel_for(long count, int threads, const std::function<void(long)>& fn);

}  // namespace isotower

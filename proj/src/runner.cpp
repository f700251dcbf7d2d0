#include "isotower/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <mutex>
#include <optional>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "isotower/error.hpp"
#include "isotower/flow.hpp"

namespace isotower {

using nlohmann::json;
namespace fs = std::filesystem;

#ifndef ISOTOWER_BUILD_ID
#define ISOTOWER_BUILD_ID "isotower-unknown"
#endif

const char* build_id() { return ISOTOWER_BUILD_ID; }

namespace {

constexpr double kGapLength = kPi / 6.0;
constexpr double kGapStart = 1.0;
constexpr double kPairWindow = 4.0;
constexpr double kPairBin = 0.25;
constexpr int kTraceMax = 5;

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

std::string error_message(const Error& e) {
  const std::string w = e.what();
  const auto pos = w.find(": ");
  return pos == std::string::npos ? w : w.substr(pos + 2);
}

json complex_array(const std::vector<Complex>& v) {
  json a = json::array();
  for (const Complex& z : v) a.push_back({z.real(), z.imag()});
  return a;
}

std::vector<Complex> complex_vector(const json& a) {
  std::vector<Complex> v;
  for (const auto& z : a) v.emplace_back(z.at(0).get<double>(), z.at(1).get<double>());
  return v;
}

json path_json(int k, const PathSample& s) {
  return {{"k", k},
          {"n", s.n},
          {"scaled_angle", s.scaled_angle},
          {"log_abs_D", s.log_abs_D},
          {"phase", s.phase},
          {"martingale", s.martingale},
          {"ratio", s.ratio},
          {"coords", complex_array(s.coords)}};
}

PathSample path_from_json(const json& j) {
  PathSample s;
  s.n = j.at("n").get<int>();
  s.scaled_angle = j.at("scaled_angle").get<double>();
  s.log_abs_D = j.at("log_abs_D").get<double>();
  s.phase = j.at("phase").get<double>();
  s.martingale = j.at("martingale").get<double>();
  s.ratio = j.at("ratio").get<double>();
  s.coords = complex_vector(j.at("coords"));
  return s;
}

void ensure_dir(const std::string& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) fail(ErrorCode::IoError, "cannot create " + dir + ": " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorCode::IoError, "cannot write " + path);
  f << text;
  if (!f) fail(ErrorCode::IoError, "write failed for " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorCode::IoError, "cannot read " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

std::string csv_header(const RunConfig& cfg, const std::string& extra) {
  std::ostringstream h;
  h << "# config_hash=" << hex64(cfg.hash()) << "\n# build_id=" << build_id() << "\n# seeds=" << cfg.seed
    << ".." << cfg.seed + cfg.ensemble - 1 << "\n# n=" << cfg.n_max << "\n";
  if (!extra.empty()) h << "# " << extra << "\n";
  return h.str();
}

std::string num(double v) {
  std::ostringstream s;
  s << std::setprecision(17) << v;
  return s.str();
}

double orthonormality_defect(const ComplexMat& F) {
  ComplexMat G = F.adjoint() * F;
  G.diagonal().array() -= 1.0;
  return G.cwiseAbs().maxCoeff();
}

}  // namespace

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

std::uint64_t fnv1a(const void* data, size_t bytes, std::uint64_t h) {
  const auto* p = static_cast<const unsigned char*>(data);
  for (size_t i = 0; i < bytes; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t angles_digest(const std::vector<double>& angles) {
  return fnv1a(angles.data(), angles.size() * sizeof(double));
}

std::string resolve_out_dir(const std::string& configured) {
  if (const char* env = std::getenv("ISOTOWER_OUT"); env && *env) return env;
  return configured;
}

void RunConfig::validate() const {
  auto bad = [](const std::string& m) { fail(ErrorCode::ConfigError, m); };
  if (n_max < 1) bad("n_max must be at least 1");
  if (mode == SimMode::Matrix && n_max > kMatrixModeMaxDim)
    bad("MATRIX mode requires n_max <= " + std::to_string(kMatrixModeMaxDim));
  if (L < 0 || L > 64) bad("L must lie in [0, 64]");
  if (k_min > k_max) bad("empty k window");
  if (ensemble < 1) bad("ensemble size must be at least 1");
  if (threads < 1) bad("threads must be at least 1");
  if (!(secular_tol > 0.0) || !(ortho_tol > 0.0)) bad("tolerances must be positive");
  if (!(eps >= 0.0)) bad("eps must be nonnegative");
  if (checkpoint_from < 1) bad("checkpoint_from must be positive");
  if (oracle && mode != SimMode::Matrix) bad("the dense oracle needs MATRIX mode");
}

std::vector<int> RunConfig::ks() const {
  std::vector<int> out;
  for (int k = k_min; k <= k_max; ++k) out.push_back(k);
  return out;
}

VecMode RunConfig::vec_mode() const {
  if (mode == SimMode::Matrix || full_vectors) return VecMode::Full;
  return L > 0 ? VecMode::Coords : VecMode::None;
}

TrajectoryOptions RunConfig::trajectory_options(std::uint64_t seed_value) const {
  TrajectoryOptions o;
  o.seed = seed_value;
  o.mode = mode;
  o.vec_mode = vec_mode();
  o.L = L;
  o.paths = ks();
  o.dense = mode == SimMode::Matrix && oracle;
  o.oracle = oracle;
  o.secular_tol = secular_tol;
  return o;
}

namespace {

json config_json(const RunConfig& c, bool for_hash) {
  json j = {{"seed", c.seed},
            {"mode", to_string(c.mode)},
            {"n_max", c.n_max},
            {"k_min", c.k_min},
            {"k_max", c.k_max},
            {"L", c.L},
            {"full_vectors", c.full_vectors},
            {"secular_tol", c.secular_tol},
            {"ortho_tol", c.ortho_tol},
            {"eps", c.eps},
            {"ensemble", c.ensemble},
            {"oracle", c.oracle},
            {"record_timing", c.record_timing},
            {"checkpoint_from", c.checkpoint_from}};
  if (!for_hash) {
    j["out_dir"] = c.out_dir;
    j["threads"] = c.threads;
    j["resume"] = c.resume;
  }
  return j;
}

}  // namespace

std::string RunConfig::to_json() const { return config_json(*this, false).dump(2); }

RunConfig RunConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigError, std::string("invalid config JSON: ") + e.what());
  }
  RunConfig c;
  try {
    if (j.contains("seed")) c.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("mode")) c.mode = sim_mode_from_string(j["mode"].get<std::string>());
    if (j.contains("n_max")) c.n_max = j["n_max"].get<int>();
    if (j.contains("k_min")) c.k_min = j["k_min"].get<int>();
    if (j.contains("k_max")) c.k_max = j["k_max"].get<int>();
    if (j.contains("L")) c.L = j["L"].get<int>();
    if (j.contains("full_vectors")) c.full_vectors = j["full_vectors"].get<bool>();
    if (j.contains("secular_tol")) c.secular_tol = j["secular_tol"].get<double>();
    if (j.contains("ortho_tol")) c.ortho_tol = j["ortho_tol"].get<double>();
    if (j.contains("eps")) c.eps = j["eps"].get<double>();
    if (j.contains("out_dir")) c.out_dir = j["out_dir"].get<std::string>();
    if (j.contains("ensemble")) c.ensemble = j["ensemble"].get<int>();
    if (j.contains("threads")) c.threads = j["threads"].get<int>();
    if (j.contains("oracle")) c.oracle = j["oracle"].get<bool>();
    if (j.contains("record_timing")) c.record_timing = j["record_timing"].get<bool>();
    if (j.contains("checkpoint_from")) c.checkpoint_from = j["checkpoint_from"].get<int>();
    if (j.contains("resume")) c.resume = j["resume"].get<std::string>();
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigError, std::string("config field has the wrong type: ") + e.what());
  }
  return c;
}

std::uint64_t RunConfig::hash() const {
  const std::string s = config_json(*this, true).dump();
  return fnv1a(s.data(), s.size());
}

std::string checkpoint_to_json(const Checkpoint& cp, const RunConfig& cfg) {
  const auto& o = cp.options;
  const auto& st = cp.state;
  json vecs = {{"rows", st.vecs.rows()}, {"cols", st.vecs.cols()}};
  std::vector<double> re, im;
  re.reserve(st.vecs.size());
  im.reserve(st.vecs.size());
  for (Eigen::Index j = 0; j < st.vecs.cols(); ++j)
    for (Eigen::Index i = 0; i < st.vecs.rows(); ++i) {
      re.push_back(st.vecs(i, j).real());
      im.push_back(st.vecs(i, j).imag());
    }
  vecs["re"] = re;
  vecs["im"] = im;
  json paths = json::array();
  for (size_t i = 0; i < o.paths.size(); ++i) {
    json p = path_json(o.paths[i], cp.path_current[i]);
    p["started"] = static_cast<bool>(cp.path_started[i]);
    paths.push_back(p);
  }
  // Result-determining fields only, so a resumed run rewrites identical checkpoints.
  json j = {{"type", "checkpoint"},
            {"config", config_json(cfg, true)},
            {"config_hash", hex64(cfg.hash())},
            {"build_id", build_id()},
            {"n", st.n},
            {"options",
             {{"seed", o.seed},
              {"mode", to_string(o.mode)},
              {"vec_mode", to_string(o.vec_mode)},
              {"L", o.L},
              {"paths", o.paths},
              {"keep_path_samples", o.keep_path_samples},
              {"dense", o.dense},
              {"oracle", o.oracle},
              {"event_log", o.event_log},
              {"secular_tol", o.secular_tol}}},
            {"state",
             {{"angles", st.angles},
              {"mode", to_string(st.mode)},
              {"L", st.L},
              {"phase_fixed", st.phase_fixed},
              {"vecs", vecs}}},
            {"paths", paths}};
  return j.dump();
}

Checkpoint checkpoint_from_json(const std::string& text) {
  Checkpoint cp;
  try {
    const json j = json::parse(text);
    if (j.value("type", "") != "checkpoint") fail(ErrorCode::ConfigError, "not a checkpoint file");
    const json& o = j.at("options");
    cp.options.seed = o.at("seed").get<std::uint64_t>();
    cp.options.mode = sim_mode_from_string(o.at("mode").get<std::string>());
    cp.options.vec_mode = vec_mode_from_string(o.at("vec_mode").get<std::string>());
    cp.options.L = o.at("L").get<int>();
    cp.options.paths = o.at("paths").get<std::vector<int>>();
    cp.options.keep_path_samples = o.at("keep_path_samples").get<bool>();
    cp.options.dense = o.at("dense").get<bool>();
    cp.options.oracle = o.at("oracle").get<bool>();
    cp.options.event_log = o.at("event_log").get<bool>();
    cp.options.secular_tol = o.at("secular_tol").get<double>();
    const json& s = j.at("state");
    cp.state.angles = s.at("angles").get<std::vector<double>>();
    cp.state.n = static_cast<int>(cp.state.angles.size());
    cp.state.mode = vec_mode_from_string(s.at("mode").get<std::string>());
    cp.state.L = s.at("L").get<int>();
    cp.state.phase_fixed = s.at("phase_fixed").get<bool>();
    const json& v = s.at("vecs");
    const auto rows = v.at("rows").get<Eigen::Index>(), cols = v.at("cols").get<Eigen::Index>();
    const auto re = v.at("re").get<std::vector<double>>(), im = v.at("im").get<std::vector<double>>();
    if (static_cast<Eigen::Index>(re.size()) != rows * cols || re.size() != im.size())
      fail(ErrorCode::ConfigError, "checkpoint eigenvector block is truncated");
    cp.state.vecs.resize(rows, cols);
    for (Eigen::Index c = 0, idx = 0; c < cols; ++c)
      for (Eigen::Index r = 0; r < rows; ++r, ++idx) cp.state.vecs(r, c) = Complex(re[idx], im[idx]);
    for (const json& p : j.at("paths")) {
      cp.path_current.push_back(path_from_json(p));
      cp.path_started.push_back(p.at("started").get<bool>());
    }
    if (j.at("n").get<int>() != cp.state.n) fail(ErrorCode::ConfigError, "checkpoint dimension mismatch");
  } catch (const json::exception& e) {
    fail(ErrorCode::ConfigError, std::string("malformed checkpoint: ") + e.what());
  }
  return cp;
}

namespace {

json step_row(const Trajectory& t, const StepRecord& rec, const RunConfig& cfg) {
  json row = {{"n", rec.n}, {"angles_digest", hex64(angles_digest(t.state().angles))}};
  json paths = json::array();
  for (const auto& p : t.paths())
    if (p.started()) paths.push_back(path_json(p.k(), p.current()));
  row["paths"] = paths;
  json diag = json::object();
  if (rec.n > 1) {
    diag["max_iterations"] = rec.report.max_iterations();
    diag["max_residual"] = rec.report.max_residual();
  }
  if (rec.oracle) {
    const OracleCheck& o = *rec.oracle;
    diag["oracle"] = {{"passed", o.passed},
                      {"angle_error", o.angle_error},
                      {"vector_error", o.vector_error},
                      {"eigen_residual", o.eigen_residual},
                      {"rank_one_sigma2", o.rank_one_sigma2},
                      {"interlacing_violations", o.interlacing_violations}};
  }
  if (is_power_of_two(rec.n) && t.state().mode == VecMode::Full) {
    const double d = orthonormality_defect(t.state().vecs);
    diag["ortho_defect"] = d;
    if (d > cfg.ortho_tol)
      fail(ErrorCode::IllConditioned, "orthonormality defect " + num(d) + " at n = " + std::to_string(rec.n));
  }
  row["diag"] = diag;
  if (cfg.record_timing) row["seconds"] = rec.seconds;
  return row;
}

bool same_trajectory(const TrajectoryOptions& a, const TrajectoryOptions& b) {
  return a.seed == b.seed && a.mode == b.mode && a.vec_mode == b.vec_mode && a.L == b.L && a.paths == b.paths &&
         a.secular_tol == b.secular_tol;
}

}  // namespace

TrajectorySummary run_trajectory(const RunConfig& cfg, const std::function<void(const std::string&)>& progress) {
  cfg.validate();
  const std::string out = resolve_out_dir(cfg.out_dir);
  ensure_dir(out);
  TrajectorySummary sum;
  sum.jsonl_path = (fs::path(out) / ("trajectory_" + std::to_string(cfg.seed) + ".jsonl")).string();

  const json meta = {{"type", "meta"},
                     {"config", config_json(cfg, true)},
                     {"config_hash", hex64(cfg.hash())},
                     {"build_id", build_id()},
                     {"rng", RngStream::generator_name()}};

  std::vector<std::string> kept;
  std::optional<Trajectory> traj;
  if (!cfg.resume.empty()) {
    Checkpoint cp = checkpoint_from_json(read_text(cfg.resume));
    TrajectoryOptions expect = cfg.trajectory_options(cfg.seed);
    if (!same_trajectory(cp.options, expect))
      fail(ErrorCode::ConfigError, "checkpoint was written by a different trajectory configuration");
    cp.options = expect;
    traj.emplace(Trajectory::restore(cp));
    if (fs::exists(sum.jsonl_path)) {
      std::ifstream in(sum.jsonl_path);
      std::string line;
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        const json r = json::parse(line, nullptr, false);
        if (r.is_discarded() || !r.contains("n")) continue;
        if (r["n"].get<int>() <= cp.state.n) kept.push_back(line);
      }
    }
  } else {
    traj.emplace(cfg.trajectory_options(cfg.seed));
  }

  std::ofstream f(sum.jsonl_path, std::ios::binary | std::ios::trunc);
  if (!f) fail(ErrorCode::IoError, "cannot write " + sum.jsonl_path);
  f << meta.dump() << "\n";
  for (const auto& l : kept) f << l << "\n";

  const auto t0 = std::chrono::steady_clock::now();
  while (traj->n() < cfg.n_max) {
    StepRecord rec;
    const int from = traj->n();
    try {
      rec = traj->step();
    } catch (const Error& e) {
      throw Error(e.code(), "step " + std::to_string(from) + " -> " + std::to_string(from + 1) +
                                " (seed " + std::to_string(cfg.seed) + "): " + error_message(e));
    }
    if (rec.oracle && !rec.oracle->passed) ++sum.oracle_failures;
    f << step_row(*traj, rec, cfg).dump() << "\n";
    if (is_power_of_two(rec.n)) {
      if (rec.n >= cfg.checkpoint_from) {
        const std::string cpath =
            (fs::path(out) / ("checkpoint_" + std::to_string(cfg.seed) + "_" + std::to_string(rec.n) + ".json"))
                .string();
        write_text(cpath, checkpoint_to_json(traj->checkpoint(), cfg));
        sum.checkpoints.push_back(cpath);
      }
      if (progress) {
        const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        progress("n = " + std::to_string(rec.n) + "  elapsed " + num(std::round(dt * 1000.0) / 1000.0) + " s");
      }
    }
  }
  f.flush();
  if (!f) fail(ErrorCode::IoError, "write failed for " + sum.jsonl_path);
  sum.n_final = traj->n();
  sum.final_digest = angles_digest(traj->state().angles);
  return sum;
}

void parallel_for(long count, int threads, const std::function<void(long)>& fn) {
  threads = std::max(1, std::min<int>(threads, static_cast<int>(std::min<long>(count, 1 << 20))));
  if (threads == 1) {
    for (long i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<long> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr err;
  std::mutex err_mutex;
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&] {
      for (long i; (i = next.fetch_add(1)) < count;) {
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(err_mutex);
          if (!err) err = std::current_exception();
        }
      }
    });
  for (auto& t : pool) t.join();
  if (err) std::rethrow_exception(err);
}

namespace {

struct SeedResult {
  bool ok = false;
  FailedSeed failure;
  std::vector<std::pair<int, PathSample>> paths;
  std::optional<PairCorrelationAccumulator> pairs;
  std::optional<TraceMomentAccumulator> trace;
  bool avoids = false;
  bool has_coord = false;
  double coord = 0.0;
  EventSummary events;
};

SeedResult run_seed(const RunConfig& cfg, std::uint64_t seed) {
  SeedResult r;
  r.failure.seed = seed;
  try {
    TrajectoryOptions o = cfg.trajectory_options(seed);
    o.event_log = true;
    Trajectory t(o);
    t.run_to(cfg.n_max);
    for (const auto& p : t.paths())
      if (p.started()) r.paths.emplace_back(p.k(), p.current());
    const auto& st = t.state();
    r.pairs.emplace(kPairWindow, kPairBin);
    r.pairs->add(make_point_sample(st.angles, seed));
    const int jmax = std::min(kTraceMax, st.n / 2);
    if (jmax >= 1) {
      r.trace.emplace(st.n, jmax);
      r.trace->add(st.angles);
    }
    r.avoids = avoids_interval(st.angles, kGapStart, kGapStart + kGapLength);
    if (st.mode != VecMode::None && st.vecs.rows() >= 1) {
      r.has_coord = true;
      r.coord = std::norm(st.vecs(0, 0));
    }
    r.events = event_diagnostics(t.event_log(), cfg.eps);
    r.events.flags.clear();
    r.ok = true;
  } catch (const Error& e) {
    r.failure.code = to_string(e.code());
    r.failure.message = error_message(e);
  }
  return r;
}

}  // namespace

EnsembleSummary run_ensemble(const RunConfig& cfg, const std::function<void(const std::string&)>& progress) {
  cfg.validate();
  const std::string out = resolve_out_dir(cfg.out_dir);
  ensure_dir(out);
  std::vector<SeedResult> results(cfg.ensemble);
  std::atomic<long> done{0};
  std::mutex progress_mutex;
  parallel_for(cfg.ensemble, cfg.threads, [&](long i) {
    results[i] = run_seed(cfg, cfg.seed + static_cast<std::uint64_t>(i));
    const long d = ++done;
    if (progress && is_power_of_two(static_cast<int>(d))) {
      std::lock_guard<std::mutex> lock(progress_mutex);
      progress(std::to_string(d) + " / " + std::to_string(cfg.ensemble) + " seeds");
    }
  });

  EnsembleSummary sum;
  PairCorrelationAccumulator pairs(kPairWindow, kPairBin);
  std::optional<TraceMomentAccumulator> trace;
  long avoid = 0;
  std::vector<double> coords;
  EventSummary events;
  std::ostringstream paths_csv;
  paths_csv << csv_header(cfg, "columns: per-seed path values at n_max")
            << "seed,k,n,scaled_angle,abs_D2_over_n,martingale,g1_re,g1_im\n";
  for (const SeedResult& r : results) {
    if (!r.ok) {
      sum.failed.push_back(r.failure);
      continue;
    }
    ++sum.completed;
    pairs.merge(*r.pairs);
    if (r.trace) {
      if (!trace) trace.emplace(*r.trace);
      else trace->merge(*r.trace);
    }
    avoid += r.avoids ? 1 : 0;
    if (r.has_coord) coords.push_back(r.coord);
    events.count_e0 += r.events.count_e0;
    events.count_e1 += r.events.count_e1;
    events.count_e2 += r.events.count_e2;
    events.count_e3_lower += r.events.count_e3_lower;
    events.count_e3_upper += r.events.count_e3_upper;
    for (const auto& [k, s] : r.paths) {
      const Complex g = s.coords.empty() ? Complex(0.0) : s.D() * s.coords[0];
      paths_csv << r.failure.seed << ',' << k << ',' << s.n << ',' << num(s.scaled_angle) << ','
                << num(std::exp(2.0 * s.log_abs_D) / s.n) << ',' << num(s.martingale) << ',' << num(g.real())
                << ',' << num(g.imag()) << "\n";
    }
  }
  sum.event_violations_e3_lower = events.count_e3_lower;

  auto file = [&](const std::string& name) {
    const std::string p = (fs::path(out) / name).string();
    sum.files.push_back(p);
    return p;
  };
  write_text(file("paths.csv"), paths_csv.str());

  json report = {{"type", "ensemble"},
                 {"config", config_json(cfg, true)},
                 {"config_hash", hex64(cfg.hash())},
                 {"build_id", build_id()},
                 {"completed", sum.completed},
                 {"failed", sum.failed.size()}};

  if (trace && trace->samples() >= 2) {
    sum.trace = trace->table();
    std::ostringstream t;
    t << csv_header(cfg, "E|tr u^j|^2 against min(j, n)") << "j,mean,sigma,target\n";
    for (const auto& row : sum.trace)
      t << row.j << ',' << num(row.mean) << ',' << num(row.sigma) << ',' << num(row.target) << "\n";
    write_text(file("trace_moments.csv"), t.str());
    json rows = json::array();
    for (const auto& row : sum.trace)
      rows.push_back({{"j", row.j}, {"mean", row.mean}, {"sigma", row.sigma}, {"target", row.target}});
    report["trace_moments"] = rows;
  }

  if (pairs.samples() >= 1000) {
    sum.histogram = pairs.histogram();
    sum.has_histogram = true;
    std::ostringstream h;
    h << csv_header(cfg, "bin_width=" + num(kPairBin) + " window=" + num(kPairWindow))
      << "bin_lo,bin_hi,density,sigma,theory_mid\n";
    for (size_t b = 0; b + 1 < sum.histogram.edges.size(); ++b)
      h << num(sum.histogram.edges[b]) << ',' << num(sum.histogram.edges[b + 1]) << ','
        << num(sum.histogram.density[b]) << ',' << num(sum.histogram.sigma[b]) << ','
        << num(pair_density_sine(sum.histogram.center(b))) << "\n";
    write_text(file("pair_correlation.csv"), h.str());
  } else {
    report["pair_correlation"] = "skipped: fewer than 1000 samples";
  }

  if (sum.completed > 0 && cfg.n_max <= 256) {
    const GapProbability gp = gap_probability(cfg.n_max, kGapStart, kGapStart + kGapLength);
    const double S = static_cast<double>(sum.completed);
    const double p = avoid / S;
    std::ostringstream g;
    g << csv_header(cfg, "probability that no eigenangle lies in [a, b]")
      << "n,a,b,toeplitz,bound,monte_carlo,mc_sigma\n"
      << cfg.n_max << ',' << num(kGapStart) << ',' << num(kGapStart + kGapLength) << ',' << num(gp.probability)
      << ',' << num(gp.bound) << ',' << num(p) << ',' << num(std::sqrt(p * (1.0 - p) / S)) << "\n";
    write_text(file("gap_probability.csv"), g.str());
  }

  if (coords.size() >= 1000 && cfg.n_max >= 2) {
    sum.delocalization = beta_delocalization_test(coords, cfg.n_max);
    sum.has_delocalization = true;
    report["delocalization"] = {{"statistic", sum.delocalization.statistic},
                                {"p_value", sum.delocalization.p_value},
                                {"mean", sum.delocalization.mean},
                                {"mean_sigma", sum.delocalization.mean_sigma},
                                {"samples", sum.delocalization.samples}};
  }
  report["events"] = {{"eps", cfg.eps},
                      {"E0", events.count_e0},
                      {"E1", events.count_e1},
                      {"E2", events.count_e2},
                      {"E3_lower", events.count_e3_lower},
                      {"E3_upper", events.count_e3_upper}};

  json failed = json::array();
  for (const auto& f : sum.failed) failed.push_back({{"seed", f.seed}, {"code", f.code}, {"message", f.message}});
  write_text(file("failed_seeds.json"),
             json{{"config_hash", hex64(cfg.hash())}, {"build_id", build_id()}, {"failed", failed}}.dump(2) + "\n");
  json names = json::array();
  for (const auto& f : sum.files) names.push_back(fs::path(f).filename().string());
  report["files"] = names;
  write_text((fs::path(out) / "ensemble_summary.json").string(), report.dump(2) + "\n");
  sum.files.push_back((fs::path(out) / "ensemble_summary.json").string());
  return sum;
}

std::vector<FlowRow> flow_study(std::uint64_t seed, const FlowStudyOptions& opt) {
  std::vector<int> snaps = opt.snapshots;
  std::sort(snaps.begin(), snaps.end());
  if (snaps.empty() || snaps.front() < 1) fail(ErrorCode::ConfigError, "flow study needs positive snapshots");
  const int top = snaps.back();
  if (opt.N < top) fail(ErrorCode::ConfigError, "N must be at least the largest snapshot");

  TrajectoryOptions o;
  o.seed = seed;
  o.mode = SimMode::Coeff;
  o.vec_mode = VecMode::Full;
  o.paths = opt.ks;
  o.secular_tol = opt.secular_tol;
  Trajectory t(o);
  std::vector<SpectralState> states;
  std::vector<std::vector<double>> yhat;
  for (int n : snaps) {
    t.run_to(n);
    states.push_back(t.state());
    std::vector<double> y;
    for (int k : opt.ks) y.push_back(scaled_angle(t.state(), k));
    yhat.push_back(std::move(y));
  }
  const ComplexMat F = t.state().vecs;
  t.drop_vectors();
  BackPropagator bp;
  while (t.n() < opt.N) {
    StepRecord rec = t.step();
    bp.push(std::move(rec.old_angles), std::move(rec.coeffs), std::move(rec.report));
  }

  std::vector<FlowRow> rows;
  for (size_t ki = 0; ki < opt.ks.size(); ++ki) {
    const int k = opt.ks[ki];
    ComplexVec v;
    if (opt.N > top) {
      v = bp.coefficients(k);
    } else {
      v = ComplexVec::Zero(top);
      v(states.back().position(k)) = 1.0;
    }
    const ComplexVec g_top = t.path(k).D() * (F * v);
    for (size_t si = 0; si < snaps.size(); ++si) {
      const int n = snaps[si];
      const ComplexVec g = g_top.head(n);
      for (double alpha : opt.alphas) {
        FlowRow r;
        r.seed = seed;
        r.n = n;
        r.k = k;
        r.alpha = alpha;
        r.normalized_residual = flow_residual(states[si], g, alpha, yhat[si][ki]);
        r.residual = r.normalized_residual * g.norm();
        rows.push_back(r);
      }
    }
  }
  return rows;
}

std::vector<FlowRow> run_flow(const RunConfig& cfg, const FlowStudyOptions& opt,
                              const std::function<void(const std::string&)>& progress) {
  cfg.validate();
  const std::string out = resolve_out_dir(cfg.out_dir);
  ensure_dir(out);
  std::vector<std::vector<FlowRow>> per(cfg.ensemble);
  std::vector<FailedSeed> failed(cfg.ensemble);
  std::vector<char> ok(cfg.ensemble, 0);
  parallel_for(cfg.ensemble, cfg.threads, [&](long i) {
    const std::uint64_t seed = cfg.seed + static_cast<std::uint64_t>(i);
    try {
      per[i] = flow_study(seed, opt);
      ok[i] = 1;
    } catch (const Error& e) {
      failed[i] = FailedSeed{seed, to_string(e.code()), error_message(e)};
    }
    if (progress) progress("seed " + std::to_string(seed) + " done");
  });
  std::ostringstream csv;
  csv << csv_header(cfg, "N=" + std::to_string(opt.N) + " g_k[n] from the eigenvector at N")
      << "n,k,alpha,residual,normalized_residual,seed\n";
  std::vector<FlowRow> all;
  json fails = json::array();
  for (long i = 0; i < cfg.ensemble; ++i) {
    if (!ok[i]) {
      fails.push_back({{"seed", failed[i].seed}, {"code", failed[i].code}, {"message", failed[i].message}});
      continue;
    }
    for (const FlowRow& r : per[i]) {
      csv << r.n << ',' << r.k << ',' << num(r.alpha) << ',' << num(r.residual) << ','
          << num(r.normalized_residual) << ',' << r.seed << "\n";
      all.push_back(r);
    }
  }
  write_text((fs::path(out) / "flow_residuals.csv").string(), csv.str());
  write_text((fs::path(out) / "failed_seeds.json").string(),
             json{{"config_hash", hex64(cfg.hash())}, {"build_id", build_id()}, {"failed", fails}}.dump(2) + "\n");
  return all;
}

}  // namespace isotower

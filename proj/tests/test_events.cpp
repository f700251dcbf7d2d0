#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "isotower/rmt_stats.hpp"
#include "isotower/simulation.hpp"

using namespace isotower;

namespace {

constexpr int kSeeds = 50;
constexpr int kFrom = 64;
constexpr int kTo = 512;  // exclusive
constexpr double kEps = 0.1;

struct Counts {
  long steps = 0, e0 = 0, e2 = 0, e3_lower = 0, e3_upper = 0;
};

// Violations over seeds 1..kSeeds for kFrom <= n < kTo, one entry per octave.
std::vector<Counts> tally() {
  std::vector<Counts> octaves;
  for (int m = kFrom; m < kTo; m *= 2) octaves.emplace_back();
  for (int seed = 1; seed <= kSeeds; ++seed) {
    TrajectoryOptions o;
    o.seed = static_cast<std::uint64_t>(seed);
    o.event_log = true;
    o.dense = false;
    Trajectory t(o);
    t.run_to(kTo);
    for (const StepLog& s : t.event_log()) {
      if (s.n < kFrom || s.n >= kTo) continue;
      const EventFlags f = event_flags(s, kEps);
      Counts& c = octaves[static_cast<size_t>(std::log2(s.n / kFrom))];
      ++c.steps;
      c.e0 += !f.e0;
      c.e2 += !f.e2;
      c.e3_lower += !f.e3_lower;
      c.e3_upper += !f.e3_upper;
    }
  }
  return octaves;
}

const std::vector<Counts>& counts() {
  static const std::vector<Counts> c = tally();
  return c;
}

Counts total() {
  Counts t;
  for (const Counts& c : counts()) {
    t.steps += c.steps;
    t.e0 += c.e0;
    t.e2 += c.e2;
    t.e3_lower += c.e3_lower;
    t.e3_upper += c.e3_upper;
  }
  return t;
}

}  // namespace

TEST_SUITE("asymptotic") {

TEST_CASE("events: E0 and the lower gap bound hold for n >= 64") {
  int lo = kFrom;
  for (const Counts& c : counts()) {
    std::printf("n in [%d, %d): steps %ld  E2 %ld  E3 lower %ld  E3 upper %ld\n", lo, 2 * lo, c.steps, c.e2,
                c.e3_lower, c.e3_upper);
    lo *= 2;
  }
  const Counts t = total();
  CHECK(t.steps == long(kSeeds) * (kTo - kFrom));
  CHECK(t.e0 == 0);
  CHECK(t.e3_lower == 0);
}

// The events hold from some random n0 on; n0 is far beyond 64 for eps = 0.1, so this
// finite-n form is reported rather than enforced.
TEST_CASE("events: no E2/E3 violations for n >= 64 over 50 seeds" * doctest::may_fail()) {
  const Counts t = total();
  CHECK(t.e2 == 0);
  CHECK(t.e3_lower == 0);
  CHECK(t.e3_upper == 0);
}

}  // TEST_SUITE

// Runs every acceptance criterion and prints one PASS/FAIL line per criterion.
#include <cstdio>
#include <cstdlib>
#include <cstring>

#include "isotower/acceptance.hpp"

int main(int argc, char** argv) {
  isotower::AcceptanceOptions opt;
  for (int i = 1; i < argc; ++i)
    if (std::strcmp(argv[i], "--quick") == 0) opt.quick = true;
  bool all = true;
  isotower::run_acceptance(opt, [&](const isotower::CriterionResult& r) {
    all = all && r.passed;
    std::printf("%s\n", isotower::format_result(r).c_str());
    std::fflush(stdout);
  });
  return all ? EXIT_SUCCESS : EXIT_FAILURE;
}

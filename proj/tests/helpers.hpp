#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include <optional>

#include "isotower/error.hpp"
#include "isotower/types.hpp"

namespace testing {

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

struct MeanSigma {
  double mean = 0.0;
  double sigma = 0.0;
};

inline MeanSigma mean_sigma(const std::vector<double>& x) {
  double s = 0.0, s2 = 0.0;
  for (double v : x) s += v, s2 += v * v;
  const double n = static_cast<double>(x.size());
  const double m = s / n;
  return {m, std::sqrt(std::max(0.0, s2 / n - m * m) / n)};
}

inline double max_abs(const isotower::ComplexMat& a) { return a.cwiseAbs().maxCoeff(); }

// Error code raised by fn, empty if it returns normally.
template <class F>
std::optional<isotower::ErrorCode> code_of(F&& fn) {
  try {
    fn();
  } catch (const isotower::Error& e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace testing

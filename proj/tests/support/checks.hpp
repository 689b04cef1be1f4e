#pragma once
#include <algorithm>
#include <cmath>

#include "dft/types.hpp"

namespace dft::testing {

// relative closeness with an absolute floor for near-zero references
inline bool close(double a, double b, double rtol, double atol = 1e-9) {
  return std::abs(a - b) <= rtol * std::max(std::abs(a), std::abs(b)) + atol;
}

// Worst per-component relative error between two same-shaped matrices.
// Components are compared against max(|a|, |b|) floored at a small fraction
// of the overall scale, so exact zeros in the reference do not turn
// finite-difference noise into huge ratios.
inline double max_rel_err(const Mat& a, const Mat& b) {
  double scale = std::max(a.cwiseAbs().maxCoeff(), b.cwiseAbs().maxCoeff());
  double floor = std::max(1e-3 * scale, 1e-12);
  double worst = 0.0;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) {
      double denom = std::max({std::abs(a(i, j)), std::abs(b(i, j)), floor});
      worst = std::max(worst, std::abs(a(i, j) - b(i, j)) / denom);
    }
  return worst;
}

}  // namespace dft::testing

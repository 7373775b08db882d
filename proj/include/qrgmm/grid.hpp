#pragma once

#include <Eigen/Dense>

#include "qrgmm/errors.hpp"

namespace qrgmm {

// Equally spaced quantile levels tau_j = j/m, j = 1..m-1.
struct QuantileGrid {
  int m = 0;
  Eigen::VectorXd levels;  // size m-1

  double level(int j) const { return levels[j - 1]; }  // 1-based: tau_j = j/m
};

// Each level is computed as the single division j/m, never by accumulating
// increments, so levels are exact in floating point.
inline QuantileGrid make_grid(int m) {
  if (m < 2) throw InvalidM("quantile grid needs m >= 2, got m=" + std::to_string(m));
  QuantileGrid grid;
  grid.m = m;
  grid.levels.resize(m - 1);
  for (int j = 1; j < m; ++j) {
    grid.levels[j - 1] = static_cast<double>(j) / static_cast<double>(m);
  }
  return grid;
}

}  // namespace qrgmm

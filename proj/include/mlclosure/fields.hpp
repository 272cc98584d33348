#pragma once

#include <Eigen/Dense>
#include <cstddef>

#include "mlclosure/errors.hpp"

namespace mlclosure {

/// Uniform periodic grid on [0, 1) with nodes x_i = i * dx.
struct PeriodicGrid {
  int nx = 256;

  double dx() const { return 1.0 / nx; }
  double x(int i) const { return i * dx(); }
  /// Index wrapped into [0, nx).
  int wrap(int i) const { return ((i % nx) + nx) % nx; }
};

/// Specific intensity f(x_i, v_q), stored nx x Q so each ordinate is a
/// contiguous column over the grid.
struct KineticField {
  PeriodicGrid grid;
  Eigen::MatrixXd values;
  double time = 0.0;

  int num_ordinates() const { return static_cast<int>(values.cols()); }
};

/// Moments m_0..m_N, stored (N+1) x nx so each cell is a contiguous column.
struct MomentField {
  PeriodicGrid grid;
  Eigen::MatrixXd values;
  double time = 0.0;

  int n_order() const { return static_cast<int>(values.rows()) - 1; }
};

inline MomentField make_moment_field(int n_order, const PeriodicGrid& grid,
                                     double time = 0.0) {
  if (n_order < 0) throw DimensionError("negative moment order");
  return MomentField{grid, Eigen::MatrixXd::Zero(n_order + 1, grid.nx), time};
}

}  // namespace mlclosure

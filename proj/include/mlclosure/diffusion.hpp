#pragma once

// Reference solver for the diffusion limit
//   d/dt m_0 = d/dx( 1/(3 sigma_s) d/dx m_0 ) - sigma_a m_0
// and the epsilon sweep comparing the moment system against it.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "mlclosure/errors.hpp"
#include "mlclosure/fields.hpp"
#include "mlclosure/kinetic.hpp"
#include "mlclosure/momsolver.hpp"

namespace mlclosure {

struct DiffusionField {
  PeriodicGrid grid;
  Eigen::VectorXd values;  // m_0
  double time = 0.0;
};

/// Tendency of the limit equation. Interface fluxes
/// D_{i+1/2} (m_{i-1} - 15 m_i + 15 m_{i+1} - m_{i+2}) / (12 dx), with D
/// interpolated to the interface at fourth order, make the divergence exactly
/// conservative and fourth order for constant sigma_s.
inline Eigen::VectorXd diffusion_rhs(const Eigen::VectorXd& m, const Eigen::VectorXd& d,
                                     const Eigen::VectorXd& sigma_a, double dx) {
  const int nx = static_cast<int>(m.size());
  auto at = [nx](const Eigen::VectorXd& v, int i) { return v[((i % nx) + nx) % nx]; };
  Eigen::VectorXd flux(nx);  // at i + 1/2
  for (int i = 0; i < nx; ++i) {
    const double di = (-at(d, i - 1) + 9.0 * at(d, i) + 9.0 * at(d, i + 1) - at(d, i + 2)) / 16.0;
    const double dface = std::max(di, std::min(at(d, i), at(d, i + 1)));
    flux[i] = dface * (at(m, i - 1) - 15.0 * at(m, i) + 15.0 * at(m, i + 1) - at(m, i + 2)) / (12.0 * dx);
  }
  Eigen::VectorXd r(nx);
  for (int i = 0; i < nx; ++i) r[i] = (flux[i] - at(flux, i - 1)) / dx - sigma_a[i] * m[i];
  return r;
}

/// Classic RK4 with dt = 0.4 dx^2 3 min(sigma_s), the last step clipped to t_end.
inline DiffusionField diffusion_solve(const DiffusionField& init, const CrossSections& xs, double t_end) {
  const int nx = init.grid.nx;
  if (init.values.size() != nx) throw DimensionError("diffusion_solve: values do not match the grid");
  if (xs.sigma_s.size() != nx || xs.sigma_a.size() != nx)
    throw DimensionError("diffusion_solve: cross sections do not match the grid");
  if (!(xs.sigma_s.minCoeff() > 0.0)) throw DomainError("diffusion_solve: singular diffusivity (sigma_s = 0)");
  if (xs.sigma_a.minCoeff() < 0.0) throw DomainError("diffusion_solve: sigma_a must be nonnegative");
  if (t_end < init.time) throw DomainError("diffusion_solve: t_end precedes the initial time");

  const double dx = init.grid.dx();
  const Eigen::VectorXd d = (3.0 * xs.sigma_s.array()).inverse().matrix();
  const double dt_max = 0.4 * dx * dx * 3.0 * xs.sigma_s.minCoeff();
  DiffusionField u = init;
  while (u.time < t_end) {
    const bool last = t_end - u.time <= dt_max;
    const double dt = last ? t_end - u.time : dt_max;
    const Eigen::VectorXd k1 = diffusion_rhs(u.values, d, xs.sigma_a, dx);
    const Eigen::VectorXd k2 = diffusion_rhs(u.values + 0.5 * dt * k1, d, xs.sigma_a, dx);
    const Eigen::VectorXd k3 = diffusion_rhs(u.values + 0.5 * dt * k2, d, xs.sigma_a, dx);
    const Eigen::VectorXd k4 = diffusion_rhs(u.values + dt * k3, d, xs.sigma_a, dx);
    u.values += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    u.time = last ? t_end : u.time + dt;
    if (!u.values.allFinite()) throw NumericalError("diffusion_solve: non-finite values");
  }
  return u;
}

/// m_0 = sin(2 pi x) + 2, higher moments zero.
inline MomentField diffusion_initial_moments(int n_order, const PeriodicGrid& grid) {
  MomentField u = make_moment_field(n_order, grid);
  for (int i = 0; i < grid.nx; ++i) u.values(0, i) = std::sin(2.0 * std::numbers::pi * grid.x(i)) + 2.0;
  return u;
}

struct DiffusionLimitRow {
  double epsilon = 0.0;
  double error = 0.0;            // relative L2 of m_0 against the limit solution
  double m2_ratio = 0.0;         // ||m_2|| / ||m_0||
  double flux_deviation = 0.0;   // relative L2 of m_1 against -(eps/(3 sigma_s)) d/dx m_0
  bool blew_up = false;
};

struct DiffusionLimitStudy {
  DiffusionField reference;
  std::vector<DiffusionLimitRow> rows;
  std::vector<MomentField> solutions;  // one per epsilon
};

/// Runs the diffusive-scaling moment system for each epsilon from the
/// diffusion initial data and compares m_0 with the limit equation at t_end.
inline DiffusionLimitStudy diffusion_limit_study(const Closure& closure, const CrossSections& xs,
                                                 const std::vector<double>& eps_list, double t_end,
                                                 const PeriodicGrid& grid, SolverConfig cfg) {
  if (eps_list.empty()) throw DomainError("diffusion_limit_study: empty epsilon list");
  const int n = closure.n_order();
  const MomentField u0 = diffusion_initial_moments(n, grid);
  DiffusionLimitStudy study;
  study.reference = diffusion_solve(DiffusionField{grid, u0.values.row(0).transpose(), 0.0}, xs, t_end);
  const Eigen::VectorXd& ref = study.reference.values;

  cfg.t_end = t_end;
  cfg.diffusive = true;
  weno::PaddedLine line(grid.nx);
  std::vector<double> dm0(grid.nx);
  for (double eps : eps_list) {
    cfg.epsilon = eps;
    SolveOutcome out = solve(u0, closure, xs, cfg);
    DiffusionLimitRow row;
    row.epsilon = eps;
    row.blew_up = out.blew_up;
    const MomentField& u = out.state;
    const Eigen::VectorXd m0 = u.values.row(0).transpose();
    row.error = (m0 - ref).norm() / ref.norm();
    if (n >= 2) row.m2_ratio = u.values.row(2).norm() / u.values.row(0).norm();
    line.load(u.values.data(), n + 1);
    weno::central_difference6(line, grid.dx(), dm0);
    Eigen::VectorXd predicted(grid.nx);
    for (int i = 0; i < grid.nx; ++i) predicted[i] = -eps / (3.0 * xs.sigma_s[i]) * dm0[i];
    if (n >= 1) {
      const Eigen::VectorXd m1 = u.values.row(1).transpose();
      row.flux_deviation = predicted.norm() > 0.0 ? (m1 - predicted).norm() / predicted.norm() : m1.norm();
    }
    study.rows.push_back(row);
    study.solutions.push_back(u);
  }
  return study;
}

}  // namespace mlclosure

#pragma once

// Finite-difference solver for the closed moment system
//   U_t + A(U) U_x = S(U),
// with A(U) U_x split into the constant P_N part (conservative, WENO5 with
// global Lax-Friedrichs splitting) and the closure remainder on the last row
// (non-conservative, central WENO derivative). SSP-RK3 in time; a Strang
// split with exact relaxation handles the diffusive scaling.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <string>
#include <vector>

#include "mlclosure/closure.hpp"
#include "mlclosure/errors.hpp"
#include "mlclosure/fields.hpp"
#include "mlclosure/hyperbolicity.hpp"
#include "mlclosure/kinetic.hpp"
#include "mlclosure/nn.hpp"
#include "mlclosure/weno.hpp"

namespace mlclosure {

enum class ClosureMode { pn, hyperbolic_ml, nonhyperbolic_ml };

inline std::string to_string(ClosureMode m) {
  switch (m) {
    case ClosureMode::pn: return "pn";
    case ClosureMode::hyperbolic_ml: return "hyp";
    case ClosureMode::nonhyperbolic_ml: return "nonhyp";
  }
  return "pn";
}

inline ClosureMode closure_mode_from_string(const std::string& s) {
  if (s == "pn") return ClosureMode::pn;
  if (s == "hyp" || s == "hyperbolic" || s == "hyperbolic_ml") return ClosureMode::hyperbolic_ml;
  if (s == "nonhyp" || s == "nonhyperbolic" || s == "nonhyperbolic_ml") return ClosureMode::nonhyperbolic_ml;
  throw DomainError("unknown closure mode '" + s + "'");
}

/// Closure coefficients at every cell: P_N (all zero) or a learned model.
class Closure {
 public:
  static Closure pn(int n_order) {
    if (n_order < 1) throw DomainError("closure: order must be >= 1");
    Closure c;
    c.n_order_ = n_order;
    c.mode_ = ClosureMode::pn;
    return c;
  }

  static Closure learned(MlpModel model) {
    model.validate();
    Closure c;
    c.n_order_ = model.n_order;
    c.mode_ = model.head == HeadType::hyperbolic ? ClosureMode::hyperbolic_ml : ClosureMode::nonhyperbolic_ml;
    c.model_ = std::make_shared<const MlpModel>(std::move(model));
    return c;
  }

  ClosureMode mode() const { return mode_; }
  int n_order() const { return n_order_; }
  bool is_zero() const { return mode_ == ClosureMode::pn; }

  /// 4 x nx coefficients (N_{N-3}, N_{N-2}, N_{N-1}, N_N) for states (N+1) x nx.
  Eigen::Matrix<double, 4, Eigen::Dynamic> evaluate(const Eigen::MatrixXd& u) const {
    if (u.rows() != n_order_ + 1) throw DimensionError("closure: state has the wrong number of moments");
    Eigen::Matrix<double, 4, Eigen::Dynamic> c = Eigen::Matrix<double, 4, Eigen::Dynamic>::Zero(4, u.cols());
    if (is_zero()) return c;
    const Eigen::MatrixXd out = forward_batch(*model_, u);
    for (Eigen::Index i = 0; i < u.cols(); ++i) {
      const auto r = apply_head(*model_, {out(0, i), out(1, i), out(2, i), out(3, i)});
      for (int s = 0; s < 4; ++s) c(s, i) = r.coeffs.values[s];
    }
    if (!c.allFinite()) throw BlowUpError("closure evaluation produced non-finite coefficients", 0.0);
    return c;
  }

  ClosureCoefficients at(const Eigen::Matrix<double, 4, Eigen::Dynamic>& c, Eigen::Index i) const {
    return ClosureCoefficients{n_order_, 4, {c(0, i), c(1, i), c(2, i), c(3, i)}};
  }

 private:
  int n_order_ = 0;
  ClosureMode mode_ = ClosureMode::pn;
  std::shared_ptr<const MlpModel> model_;
};

enum class LfPolicy { spectral, fixed };

struct SolverConfig {
  ClosureMode mode = ClosureMode::pn;
  bool diffusive = false;
  double epsilon = 1.0;
  int nx = 256;
  double cfl = 0.8;             // dt = cfl dx / c (spectral) or cfl dx (fixed)
  LfPolicy lf_policy = LfPolicy::spectral;
  double lf_alpha = 5.0;        // used with LfPolicy::fixed
  double t_end = 1.0;
  int eigen_trace_every = 1;
  double blowup_factor = 1e6;

  /// Settings tied to each closure mode.
  static SolverConfig for_mode(ClosureMode mode, int nx = 256) {
    SolverConfig c;
    c.mode = mode;
    c.nx = nx;
    if (mode == ClosureMode::nonhyperbolic_ml) {
      c.lf_policy = LfPolicy::fixed;
      c.lf_alpha = 5.0;
      c.cfl = 0.1;
      c.eigen_trace_every = 10;
    }
    return c;
  }
};

struct SpectralInfo {
  double max_speed = 0.0;  // max over cells of the spectral radius
  double max_imag = 0.0;   // max over cells of |Im lambda|
};

/// Spectral radius and largest imaginary part over all cells.
inline SpectralInfo spectral_scan(const Closure& closure, const Eigen::Matrix<double, 4, Eigen::Dynamic>& coeffs) {
  SpectralInfo info;
  const int n = closure.n_order();
  if (closure.is_zero()) {
    const auto [rho, im] = spectral_radius_and_max_imag(assemble_matrix(pn_closure(n)).entries);
    return SpectralInfo{rho, im};
  }
  Eigen::MatrixXd a = assemble_matrix(pn_closure(n)).entries;
  for (Eigen::Index i = 0; i < coeffs.cols(); ++i) {
    a.row(n) = closure_row(closure.at(coeffs, i)).transpose();
    const auto [rho, im] = spectral_radius_and_max_imag(a);
    info.max_speed = std::max(info.max_speed, rho);
    info.max_imag = std::max(info.max_imag, im);
  }
  return info;
}

inline double max_wave_speed(const MomentField& u, const Closure& closure) {
  return spectral_scan(closure, closure.evaluate(u.values)).max_speed;
}

/// Tendency inv_eps * (-(A_bar U)_x - R(U) U_x), plus the relaxation source
/// when include_source. R holds the closure part of the last row; coeffs_in
/// skips re-evaluating the closure.
inline Eigen::MatrixXd spatial_rhs(const MomentField& u, const Closure& closure, const CrossSections& xs,
                                   double alpha, double inv_eps = 1.0, bool include_source = true,
                                   const Eigen::Matrix<double, 4, Eigen::Dynamic>* coeffs_in = nullptr) {
  const int n = u.n_order();
  const int nx = u.grid.nx;
  if (n != closure.n_order()) throw DimensionError("spatial_rhs: closure order does not match the state");
  if (u.values.cols() != nx) throw DimensionError("spatial_rhs: state does not match the grid");
  const double dx = u.grid.dx();
  const Eigen::MatrixXd abar = assemble_matrix(pn_closure(n)).entries;
  const Eigen::MatrixXd flux = abar * u.values;

  Eigen::MatrixXd out(n + 1, nx);
  weno::PaddedLine fl(nx), ul(nx);
  std::vector<double> d(nx);
  for (int k = 0; k <= n; ++k) {
    fl.load(flux.data() + k, n + 1);
    ul.load(u.values.data() + k, n + 1);
    weno::lf_flux_derivative(fl, ul, alpha, dx, d);
    for (int i = 0; i < nx; ++i) out(k, i) = -d[i];
  }

  if (!closure.is_zero()) {
    Eigen::Matrix<double, 4, Eigen::Dynamic> local;
    const auto& c = coeffs_in ? *coeffs_in : (local = closure.evaluate(u.values));
    const double scale = (n + 1.0) / (2.0 * n + 1.0);
    for (int s = 0; s < 4; ++s) {
      const int k = n - 3 + s;
      if (k < 0) continue;
      ul.load(u.values.data() + k, n + 1);
      weno::central_derivative(ul, dx, d);
      for (int i = 0; i < nx; ++i) out(n, i) -= scale * c(s, i) * d[i];
    }
  }
  out *= inv_eps;

  if (include_source) {
    if (xs.sigma_s.size() != nx || xs.sigma_a.size() != nx)
      throw DimensionError("spatial_rhs: cross sections do not match the grid");
    for (int i = 0; i < nx; ++i) {
      out(0, i) -= xs.sigma_a[i] * u.values(0, i);
      for (int k = 1; k <= n; ++k) out(k, i) -= (xs.sigma_s[i] + xs.sigma_a[i]) * u.values(k, i);
    }
  }
  if (!out.allFinite()) throw BlowUpError("spatial_rhs produced non-finite values", u.time);
  return out;
}

struct TraceRow {
  double t = 0.0;
  double c_max = 0.0;
  double max_imag = 0.0;
};

struct SolveOutcome {
  MomentField state;                  // at t_end, or the last finite state before blow-up
  std::vector<MomentField> snapshots;  // at the requested times that were reached
  std::vector<TraceRow> trace;
  bool blew_up = false;
  double blowup_time = std::numeric_limits<double>::quiet_NaN();
  std::string blowup_reason;
  long steps = 0;
  double max_imag_ratio = 0.0;  // max over trace of |Im| / (1 + c_max)
};

namespace detail {

inline void relax_exact(MomentField& u, const CrossSections& xs, double inv_eps2, double dt) {
  const int n = u.n_order();
  for (int i = 0; i < u.grid.nx; ++i) {
    u.values(0, i) *= std::exp(-xs.sigma_a[i] * dt);
    const double rate = xs.sigma_s[i] * inv_eps2 + xs.sigma_a[i];
    const double f = std::exp(-rate * dt);
    for (int k = 1; k <= n; ++k) u.values(k, i) *= f;
  }
}

}  // namespace detail

/// Time integration to cfg.t_end, recording snapshots at the given times, the
/// eigenvalue trace and blow-up (non-finite state or growth beyond
/// blowup_factor times the initial maximum) as an outcome.
inline SolveOutcome solve(const MomentField& u0, const Closure& closure, const CrossSections& xs,
                          const SolverConfig& cfg, std::vector<double> snapshot_times = {}) {
  if (!(cfg.t_end > 0.0)) throw DomainError("solve: t_end must be positive");
  if (cfg.diffusive && !(cfg.epsilon > 0.0)) throw DomainError("solve: epsilon must be positive");
  if (!(cfg.cfl > 0.0)) throw DomainError("solve: cfl must be positive");
  if (u0.n_order() != closure.n_order()) throw DimensionError("solve: closure order does not match the state");
  xs.validate(u0.grid.nx);

  const double eps = cfg.diffusive ? cfg.epsilon : 1.0;
  const double inv_eps = 1.0 / eps;
  const double dx = u0.grid.dx();
  const double u0_max = std::max(u0.values.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  std::sort(snapshot_times.begin(), snapshot_times.end());
  std::size_t next_snap = 0;

  SolveOutcome out;
  out.state = u0;
  MomentField& u = out.state;
  MomentField s1 = u, s2 = u;

  const bool spectral = cfg.lf_policy == LfPolicy::spectral;
  SpectralInfo fixed_info;
  if (closure.is_zero()) fixed_info = spectral_scan(closure, {});

  auto trip = [&](const std::string& why, double t) {
    out.blew_up = true;
    out.blowup_time = t;
    out.blowup_reason = why;
  };

  while (u.time < cfg.t_end && !out.blew_up) {
    while (next_snap < snapshot_times.size() && snapshot_times[next_snap] <= u.time) {
      out.snapshots.push_back(u);
      ++next_snap;
    }
    try {
      Eigen::Matrix<double, 4, Eigen::Dynamic> coeffs = closure.evaluate(u.values);
      SpectralInfo info = fixed_info;
      const bool scan = !closure.is_zero() && (spectral || out.steps % cfg.eigen_trace_every == 0);
      if (scan) info = spectral_scan(closure, coeffs);
      if (spectral || out.steps % cfg.eigen_trace_every == 0) {
        out.trace.push_back({u.time, info.max_speed, info.max_imag});
        out.max_imag_ratio = std::max(out.max_imag_ratio, info.max_imag / (1.0 + info.max_speed));
      }
      double alpha = cfg.lf_alpha;
      double dt = cfg.cfl * dx * eps;
      if (spectral) {
        if (!(info.max_speed > 0.0) || !std::isfinite(info.max_speed))
          throw BlowUpError("degenerate wave speed", u.time);
        alpha = info.max_speed;
        dt = cfg.cfl * dx * eps / info.max_speed;
      }
      double stop = cfg.t_end;
      if (next_snap < snapshot_times.size()) stop = std::min(stop, snapshot_times[next_snap]);
      const bool last = stop - u.time <= dt;
      if (last) dt = stop - u.time;

      const bool split = cfg.diffusive;
      if (split) detail::relax_exact(u, xs, inv_eps * inv_eps, 0.5 * dt);
      const bool src = !split;
      if (split) coeffs = closure.evaluate(u.values);
      s1.values = u.values + dt * spatial_rhs(u, closure, xs, alpha, inv_eps, src, &coeffs);
      s2.values = 0.75 * u.values + 0.25 * (s1.values + dt * spatial_rhs(s1, closure, xs, alpha, inv_eps, src));
      u.values = (u.values + 2.0 * (s2.values + dt * spatial_rhs(s2, closure, xs, alpha, inv_eps, src))) / 3.0;
      if (split) detail::relax_exact(u, xs, inv_eps * inv_eps, 0.5 * dt);
      u.time = last ? stop : u.time + dt;
      ++out.steps;
      if (!u.values.allFinite()) throw BlowUpError("non-finite moments", u.time);
      if (u.values.cwiseAbs().maxCoeff() > cfg.blowup_factor * u0_max)
        throw BlowUpError("moments grew beyond the blow-up threshold", u.time);
    } catch (const BlowUpError& e) {
      trip(e.what(), std::max(e.time(), u.time));
    }
  }
  if (!out.blew_up) {
    while (next_snap < snapshot_times.size() && snapshot_times[next_snap] <= u.time) {
      out.snapshots.push_back(u);
      ++next_snap;
    }
  }
  return out;
}

/// SSP-RK3 to cfg.t_end in standard scaling; blow-up is thrown.
inline MomentField advance(const MomentField& u0, const Closure& closure, const CrossSections& xs,
                           SolverConfig cfg) {
  cfg.diffusive = false;
  SolveOutcome o = solve(u0, closure, xs, cfg);
  if (o.blew_up) throw BlowUpError(o.blowup_reason, o.blowup_time);
  return o.state;
}

/// Diffusive scaling with Knudsen number epsilon.
inline MomentField advance_diffusive(const MomentField& u0, const Closure& closure, const CrossSections& xs,
                                     double epsilon, SolverConfig cfg) {
  if (!(epsilon > 0.0)) throw DomainError("advance_diffusive: epsilon must be positive");
  cfg.diffusive = true;
  cfg.epsilon = epsilon;
  SolveOutcome o = solve(u0, closure, xs, cfg);
  if (o.blew_up) throw BlowUpError(o.blowup_reason, o.blowup_time);
  return o.state;
}

struct ErrorMetrics {
  Eigen::VectorXd relative_l2;    // per moment
  Eigen::VectorXd relative_linf;  // per moment
};

/// Per-moment relative discrete L2 and L-infinity errors.
inline ErrorMetrics error_metrics(const Eigen::MatrixXd& u, const Eigen::MatrixXd& ref) {
  if (u.rows() != ref.rows() || u.cols() != ref.cols())
    throw DimensionError("error_metrics: shapes differ");
  ErrorMetrics m{Eigen::VectorXd(u.rows()), Eigen::VectorXd(u.rows())};
  for (Eigen::Index k = 0; k < u.rows(); ++k) {
    const double rn = ref.row(k).norm();
    const double ri = ref.row(k).cwiseAbs().maxCoeff();
    const Eigen::RowVectorXd d = u.row(k) - ref.row(k);
    m.relative_l2[k] = rn > 0.0 ? d.norm() / rn : d.norm();
    m.relative_linf[k] = ri > 0.0 ? d.cwiseAbs().maxCoeff() / ri : d.cwiseAbs().maxCoeff();
  }
  return m;
}

inline ErrorMetrics error_metrics(const MomentField& u, const MomentField& ref) {
  return error_metrics(u.values, ref.values);
}

/// Nodes of a fine periodic grid shared with a coarser one (nested powers of two).
inline Eigen::MatrixXd restrict_to(const Eigen::MatrixXd& fine, int coarse_nx) {
  const Eigen::Index fine_nx = fine.cols();
  if (coarse_nx < 1 || fine_nx % coarse_nx != 0) throw DimensionError("restrict_to: grids are not nested");
  const Eigen::Index r = fine_nx / coarse_nx;
  Eigen::MatrixXd c(fine.rows(), coarse_nx);
  for (int i = 0; i < coarse_nx; ++i) c.col(i) = fine.col(i * r);
  return c;
}

}  // namespace mlclosure

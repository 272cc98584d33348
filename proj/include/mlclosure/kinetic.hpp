#pragma once

// Discrete-ordinates reference solver for the slab-geometry transport
// equation  f_t + v f_x = sigma_s (<f> - f) - sigma_a f  on a periodic grid,
// and the generator of closure training data built on it.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mlclosure/errors.hpp"
#include "mlclosure/fields.hpp"
#include "mlclosure/io.hpp"
#include "mlclosure/legendre.hpp"
#include "mlclosure/weno.hpp"

namespace mlclosure {

/// Scattering and absorption coefficients sampled at the grid nodes.
struct CrossSections {
  Eigen::VectorXd sigma_s;
  Eigen::VectorXd sigma_a;

  static CrossSections constant(const PeriodicGrid& grid, double sigma_s, double sigma_a) {
    return CrossSections{Eigen::VectorXd::Constant(grid.nx, sigma_s),
                         Eigen::VectorXd::Constant(grid.nx, sigma_a)};
  }

  static CrossSections from_functions(const PeriodicGrid& grid,
                                      const std::function<double(double)>& sigma_s,
                                      const std::function<double(double)>& sigma_a) {
    CrossSections xs{Eigen::VectorXd(grid.nx), Eigen::VectorXd(grid.nx)};
    for (int i = 0; i < grid.nx; ++i) {
      xs.sigma_s[i] = sigma_s(grid.x(i));
      xs.sigma_a[i] = sigma_a(grid.x(i));
    }
    return xs;
  }

  void validate(int nx) const {
    if (sigma_s.size() != nx || sigma_a.size() != nx)
      throw DimensionError("cross sections do not match the grid");
    if (sigma_s.minCoeff() < 0.0 || sigma_a.minCoeff() < 0.0)
      throw DomainError("cross sections must be nonnegative");
  }

  double max_total() const { return (sigma_s + sigma_a).maxCoeff(); }
};

/// Intensity independent of v: f(x, v) = profile(x).
inline KineticField isotropic_field(const PeriodicGrid& grid, int num_ordinates,
                                    const std::function<double(double)>& profile,
                                    double time = 0.0) {
  KineticField f{grid, Eigen::MatrixXd(grid.nx, num_ordinates), time};
  for (int i = 0; i < grid.nx; ++i) f.values.row(i).setConstant(profile(grid.x(i)));
  return f;
}

/// -v_q d/dx f + sigma_s (1/2 sum_q w_q f - f) - sigma_a f, with the
/// transport derivative by WENO5 upwinded on sign(v_q).
inline Eigen::MatrixXd kinetic_rhs(const KineticField& f, const CrossSections& xs,
                                   const Quadrature& quad) {
  const int nx = f.grid.nx;
  const int nq = quad.size();
  if (f.values.rows() != nx || f.values.cols() != nq)
    throw DimensionError("kinetic_rhs: intensity shape does not match grid x quadrature");
  if (xs.sigma_s.size() != nx || xs.sigma_a.size() != nx)
    throw DimensionError("kinetic_rhs: cross sections do not match the grid");

  Eigen::VectorXd w(nq);
  for (int q = 0; q < nq; ++q) w[q] = 0.5 * quad.weights[q];
  const Eigen::VectorXd mean = f.values * w;

  Eigen::MatrixXd out(nx, nq);
  weno::PaddedLine line(nx);
  std::vector<double> dfdx(nx);
  for (int q = 0; q < nq; ++q) {
    const double v = quad.nodes[q];
    line.load(f.values.col(q).data());
    weno::upwind_derivative(line, v > 0.0, f.grid.dx(), dfdx);
    for (int i = 0; i < nx; ++i) {
      const double fi = f.values(i, q);
      out(i, q) = -v * dfdx[i] + xs.sigma_s[i] * (mean[i] - fi) - xs.sigma_a[i] * fi;
    }
  }
  return out;
}

/// cfl dx / max(1, dx max(sigma_s + sigma_a)): transport speed bound |v| < 1,
/// tightened when the collision rate dominates.
inline double kinetic_time_step(const PeriodicGrid& grid, const CrossSections& xs, double cfl) {
  return cfl * grid.dx() / std::max(1.0, grid.dx() * xs.max_total());
}

/// Advances f in place to t_target with SSP-RK3; the last step is clipped.
inline void kinetic_advance(KineticField& f, const CrossSections& xs, const Quadrature& quad,
                            double t_target, double cfl) {
  if (!(cfl > 0.0 && cfl <= 1.0)) throw DomainError("kinetic solve: cfl must be in (0, 1]");
  xs.validate(f.grid.nx);
  const double dt_max = kinetic_time_step(f.grid, xs, cfl);
  KineticField stage{f.grid, f.values, f.time};
  while (f.time < t_target) {
    const double dt = std::min(dt_max, t_target - f.time);
    stage.values = f.values + dt * kinetic_rhs(f, xs, quad);
    stage.values = 0.75 * f.values + 0.25 * (stage.values + dt * kinetic_rhs(stage, xs, quad));
    f.values = (f.values + 2.0 * (stage.values + dt * kinetic_rhs(stage, xs, quad))) / 3.0;
    f.time = (t_target - f.time <= dt_max) ? t_target : f.time + dt;
    if (!f.values.allFinite()) throw BlowUpError("kinetic solver produced non-finite intensity", f.time);
  }
}

inline KineticField kinetic_solve(KineticField f0, const CrossSections& xs,
                                  const Quadrature& quad, double t_end, double cfl = 0.8) {
  if (!(t_end > 0.0)) throw DomainError("kinetic_solve: t_end must be positive");
  kinetic_advance(f0, xs, quad, t_end, cfl);
  return f0;
}

/// Truncated Fourier profile offset + sum_j a_j cos(2 pi j x) + b_j sin(2 pi j x).
struct FourierProfile {
  double offset = 0.0;
  std::vector<double> cos_coeffs;
  std::vector<double> sin_coeffs;

  double operator()(double x) const {
    double v = offset;
    for (std::size_t j = 0; j < cos_coeffs.size(); ++j) {
      const double arg = 2.0 * std::numbers::pi * static_cast<double>(j + 1) * x;
      v += cos_coeffs[j] * std::cos(arg) + sin_coeffs[j] * std::sin(arg);
    }
    return v;
  }
};

struct TrainingDataConfig {
  int runs = 100;
  int n_order = 6;
  int nx = 256;
  int quad_points = 64;
  double cfl = 0.8;
  std::vector<double> sample_times{0.25, 0.5, 0.75, 1.0};
  int fourier_degree = 4;
  double offset_min = 2.0;
  double offset_max = 5.0;
  double sigma_s_min = 0.5;
  double sigma_s_max = 100.0;
  std::vector<double> sigma_a_choices{0.0, 0.5, 1.0};
  double positivity_tolerance = 1e-8;
  std::uint64_t seed = 20211;
};

/// One row per (run, snapshot, grid point); columns are samples.
struct Dataset {
  int n_order = 0;
  Eigen::MatrixXd moments;    // (N+1) x S
  Eigen::MatrixXd gradients;  // (N+2) x S : d/dx m_0..m_{N+1}
  Eigen::VectorXd sigma_s;
  Eigen::VectorXd sigma_a;
  Eigen::VectorXd time;

  int size() const { return static_cast<int>(moments.cols()); }
};

struct RunDraw {
  FourierProfile profile;
  double sigma_s = 0.0;
  double sigma_a = 0.0;
};

/// Draws one run of the training distribution; profiles that are not
/// strictly positive on the grid are redrawn.
inline RunDraw draw_training_run(const TrainingDataConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  std::uniform_real_distribution<double> offset(cfg.offset_min, cfg.offset_max);
  std::uniform_real_distribution<double> log_sigma(std::log(cfg.sigma_s_min),
                                                   std::log(cfg.sigma_s_max));
  std::uniform_int_distribution<std::size_t> pick(0, cfg.sigma_a_choices.size() - 1);
  RunDraw draw;
  draw.sigma_s = std::exp(log_sigma(rng));
  draw.sigma_a = cfg.sigma_a_choices[pick(rng)];
  const PeriodicGrid grid{cfg.nx};
  for (int attempt = 0;; ++attempt) {
    if (attempt > 1000) throw NumericalError("could not draw a positive initial condition");
    FourierProfile p;
    p.offset = offset(rng);
    for (int j = 0; j < cfg.fourier_degree; ++j) {
      p.cos_coeffs.push_back(unit(rng));
      p.sin_coeffs.push_back(unit(rng));
    }
    double fmin = p(0.0);
    for (int i = 1; i < grid.nx; ++i) fmin = std::min(fmin, p(grid.x(i)));
    if (fmin > 0.0) {
      draw.profile = std::move(p);
      return draw;
    }
  }
}

inline std::mt19937_64 run_rng(std::uint64_t seed, int run) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(run)};
  return std::mt19937_64(seq);
}

/// Sixth-order central x-derivatives of every row of a (K x nx) block.
inline Eigen::MatrixXd central_gradients(const Eigen::MatrixXd& rows, const PeriodicGrid& grid) {
  Eigen::MatrixXd out(rows.rows(), rows.cols());
  weno::PaddedLine line(grid.nx);
  std::vector<double> d(grid.nx);
  for (Eigen::Index k = 0; k < rows.rows(); ++k) {
    line.load(rows.data() + k, rows.rows());
    weno::central_difference6(line, grid.dx(), d);
    for (int i = 0; i < grid.nx; ++i) out(k, i) = d[i];
  }
  return out;
}

/// Appends samples (moments m_0..m_N, gradients of m_0..m_{N+1}) of one snapshot.
inline void append_snapshot(Dataset& ds, const KineticField& f, const Quadrature& quad,
                            double sigma_s, double sigma_a) {
  const int n = ds.n_order;
  const MomentField m = moments_from_kinetic(f, quad, n + 1);
  const Eigen::MatrixXd grad = central_gradients(m.values, f.grid);
  const Eigen::Index s0 = ds.moments.cols();
  const int nx = f.grid.nx;
  ds.moments.conservativeResize(n + 1, s0 + nx);
  ds.gradients.conservativeResize(n + 2, s0 + nx);
  ds.sigma_s.conservativeResize(s0 + nx);
  ds.sigma_a.conservativeResize(s0 + nx);
  ds.time.conservativeResize(s0 + nx);
  ds.moments.rightCols(nx) = m.values.topRows(n + 1);
  ds.gradients.rightCols(nx) = grad;
  ds.sigma_s.tail(nx).setConstant(sigma_s);
  ds.sigma_a.tail(nx).setConstant(sigma_a);
  ds.time.tail(nx).setConstant(f.time);
}

inline Dataset generate_training_set(const TrainingDataConfig& cfg,
                                     std::ostream* log = &std::cerr) {
  if (cfg.runs < 0 || cfg.n_order < 1) throw DomainError("training config: bad runs or order");
  Dataset ds;
  ds.n_order = cfg.n_order;
  ds.moments.resize(cfg.n_order + 1, 0);
  ds.gradients.resize(cfg.n_order + 2, 0);
  const Quadrature quad = gauss_legendre(cfg.quad_points);
  const PeriodicGrid grid{cfg.nx};
  std::vector<double> times = cfg.sample_times;
  std::sort(times.begin(), times.end());

  for (int run = 0; run < cfg.runs; ++run) {
    auto rng = run_rng(cfg.seed, run);
    const RunDraw draw = draw_training_run(cfg, rng);
    const CrossSections xs = CrossSections::constant(grid, draw.sigma_s, draw.sigma_a);
    KineticField f = isotropic_field(grid, quad.size(), draw.profile);
    Dataset run_ds{cfg.n_order, Eigen::MatrixXd(cfg.n_order + 1, 0),
                   Eigen::MatrixXd(cfg.n_order + 2, 0), {}, {}, {}};
    try {
      for (double t : times) {
        if (t > f.time) kinetic_advance(f, xs, quad, t, cfg.cfl);
        const double fmax = f.values.maxCoeff();
        if (f.values.minCoeff() < -cfg.positivity_tolerance * fmax) {
          if (log) *log << "run " << run << ": negative intensity at t=" << t << ", snapshot dropped\n";
          continue;
        }
        append_snapshot(run_ds, f, quad, draw.sigma_s, draw.sigma_a);
      }
    } catch (const BlowUpError& e) {
      if (log) *log << "run " << run << " skipped: " << e.what() << "\n";
      continue;
    }
    const Eigen::Index s0 = ds.size();
    const Eigen::Index add = run_ds.size();
    ds.moments.conservativeResize(Eigen::NoChange, s0 + add);
    ds.gradients.conservativeResize(Eigen::NoChange, s0 + add);
    ds.sigma_s.conservativeResize(s0 + add);
    ds.sigma_a.conservativeResize(s0 + add);
    ds.time.conservativeResize(s0 + add);
    ds.moments.rightCols(add) = run_ds.moments;
    ds.gradients.rightCols(add) = run_ds.gradients;
    ds.sigma_s.tail(add) = run_ds.sigma_s;
    ds.sigma_a.tail(add) = run_ds.sigma_a;
    ds.time.tail(add) = run_ds.time;
  }
  return ds;
}

inline std::string dataset_header(int n_order) {
  std::vector<std::string> cols;
  for (int k = 0; k <= n_order; ++k) cols.push_back("m_" + std::to_string(k));
  for (int k = 0; k <= n_order + 1; ++k) cols.push_back("dm_" + std::to_string(k));
  cols.insert(cols.end(), {"sigma_s", "sigma_a", "t"});
  return io::join(cols);
}

inline std::string dataset_to_csv(const Dataset& ds) {
  std::ostringstream out;
  out << dataset_header(ds.n_order) << '\n';
  for (int s = 0; s < ds.size(); ++s) {
    std::vector<std::string> f;
    for (int k = 0; k <= ds.n_order; ++k) f.push_back(io::format_double(ds.moments(k, s)));
    for (int k = 0; k <= ds.n_order + 1; ++k) f.push_back(io::format_double(ds.gradients(k, s)));
    f.push_back(io::format_double(ds.sigma_s[s]));
    f.push_back(io::format_double(ds.sigma_a[s]));
    f.push_back(io::format_double(ds.time[s]));
    out << io::join(f) << '\n';
  }
  return out.str();
}

inline Dataset dataset_from_csv(const io::CsvTable& table) {
  const int cols = static_cast<int>(table.header.size());
  const int n = (cols - 5) / 2;  // (N+1) + (N+2) + 3 = 2N + 6
  if (cols != 2 * n + 6 || n < 1 || table.header != io::split(dataset_header(n)))
    throw DimensionError("dataset csv: unexpected header");
  Dataset ds;
  ds.n_order = n;
  const Eigen::Index s = static_cast<Eigen::Index>(table.rows.size());
  ds.moments.resize(n + 1, s);
  ds.gradients.resize(n + 2, s);
  ds.sigma_s.resize(s);
  ds.sigma_a.resize(s);
  ds.time.resize(s);
  for (Eigen::Index j = 0; j < s; ++j) {
    const auto& r = table.rows[j];
    for (int k = 0; k <= n; ++k) ds.moments(k, j) = r[k];
    for (int k = 0; k <= n + 1; ++k) ds.gradients(k, j) = r[n + 1 + k];
    ds.sigma_s[j] = r[2 * n + 3];
    ds.sigma_a[j] = r[2 * n + 4];
    ds.time[j] = r[2 * n + 5];
  }
  return ds;
}

}  // namespace mlclosure

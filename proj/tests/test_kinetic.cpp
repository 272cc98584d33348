#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "mlclosure/kinetic.hpp"

using namespace mlclosure;

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

KineticField sine_field(const PeriodicGrid& grid, int nq) {
  return isotropic_field(grid, nq, [](double x) { return std::sin(kTwoPi * x); });
}

double relative_l2(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / b.norm();
}

}  // namespace

TEST(KineticRhs, ConstantStates) {
  const PeriodicGrid grid{32};
  const Quadrature quad = gauss_legendre(8);
  const auto f = isotropic_field(grid, quad.size(), [](double) { return 3.0; });
  EXPECT_LT(kinetic_rhs(f, CrossSections::constant(grid, 0, 0), quad).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_LT(kinetic_rhs(f, CrossSections::constant(grid, 1, 0), quad).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(KineticRhs, SmoothAdvection) {
  const PeriodicGrid grid{256};
  const Quadrature quad = gauss_legendre(8);
  const auto rhs = kinetic_rhs(sine_field(grid, quad.size()), CrossSections::constant(grid, 0, 0), quad);
  double err = 0.0;
  for (int i = 0; i < grid.nx; ++i)
    for (int q = 0; q < quad.size(); ++q)
      err = std::max(err, std::abs(rhs(i, q) + quad.nodes[q] * kTwoPi * std::cos(kTwoPi * grid.x(i))));
  EXPECT_LT(err, 1e-7);
}

TEST(KineticRhs, ShapeMismatch) {
  const PeriodicGrid grid{16};
  const Quadrature quad = gauss_legendre(8);
  KineticField f{grid, Eigen::MatrixXd::Zero(16, 4), 0.0};
  EXPECT_THROW(kinetic_rhs(f, CrossSections::constant(grid, 0, 0), quad), DimensionError);
}

TEST(KineticSolve, FreeTransport) {
  const PeriodicGrid grid{256};
  const Quadrature quad = gauss_legendre(16);
  const auto f = kinetic_solve(sine_field(grid, quad.size()), CrossSections::constant(grid, 0, 0), quad, 1.0);
  Eigen::MatrixXd exact(grid.nx, quad.size());
  for (int i = 0; i < grid.nx; ++i)
    for (int q = 0; q < quad.size(); ++q) exact(i, q) = std::sin(kTwoPi * (grid.x(i) - quad.nodes[q]));
  EXPECT_DOUBLE_EQ(f.time, 1.0);
  EXPECT_LT(relative_l2(f.values, exact), 1e-4);
}

TEST(KineticSolve, AbsorbingEquilibrium) {
  const PeriodicGrid grid{32};
  const Quadrature quad = gauss_legendre(8);
  const auto f0 = isotropic_field(grid, quad.size(), [](double) { return 2.0; });
  const auto f = kinetic_solve(f0, CrossSections::constant(grid, 1, 1), quad, 0.7);
  // SSP-RK3 applied to y' = -y multiplies by 1 - z + z^2/2 - z^3/6 per step
  const double dt = 0.8 / 32.0;
  const int full = static_cast<int>(0.7 / dt + 1e-9);
  auto amp = [](double z) { return 1.0 - z + z * z / 2.0 - z * z * z / 6.0; };
  const double discrete = 2.0 * std::pow(amp(dt), full) * amp(0.7 - full * dt);
  EXPECT_NEAR(f.values.maxCoeff(), discrete, 1e-14);
  EXPECT_NEAR(f.values.minCoeff(), discrete, 1e-14);
  EXPECT_NEAR(f.values.maxCoeff(), 2.0 * std::exp(-0.7), 1e-6);
}

TEST(KineticSolve, ScatteringConservesDensity) {
  const PeriodicGrid grid{64};
  const Quadrature quad = gauss_legendre(16);
  KineticField f0{grid, Eigen::MatrixXd(grid.nx, quad.size()), 0.0};
  for (int i = 0; i < grid.nx; ++i)
    for (int q = 0; q < quad.size(); ++q)
      f0.values(i, q) = 2.0 + std::sin(kTwoPi * grid.x(i)) * (1.0 + quad.nodes[q]);
  const double mass0 = moments_from_kinetic(f0, quad, 0).values.sum();
  const auto f = kinetic_solve(f0, CrossSections::constant(grid, 5.0, 0.0), quad, 0.5);
  const double mass = moments_from_kinetic(f, quad, 0).values.sum();
  EXPECT_NEAR(mass, mass0, 1e-10 * std::abs(mass0));
}

TEST(KineticSolve, EquilibriumIsSteady) {
  const PeriodicGrid grid{32};
  const Quadrature quad = gauss_legendre(8);
  const auto f0 = isotropic_field(grid, quad.size(), [](double) { return 1.5; });
  const auto f = kinetic_solve(f0, CrossSections::constant(grid, 10.0, 0.0), quad, 0.3);
  EXPECT_LT((f.values - f0.values).cwiseAbs().maxCoeff(), 1e-13);
}

TEST(KineticSolve, SpatialOrder) {
  const Quadrature quad = gauss_legendre(4);
  std::vector<double> errs;
  for (int nx : {64, 128, 256}) {
    const PeriodicGrid grid{nx};
    // small cfl so the spatial error dominates
    const auto f = kinetic_solve(sine_field(grid, quad.size()), CrossSections::constant(grid, 0, 0), quad, 0.25, 0.1);
    Eigen::MatrixXd exact(nx, quad.size());
    for (int i = 0; i < nx; ++i)
      for (int q = 0; q < quad.size(); ++q) exact(i, q) = std::sin(kTwoPi * (grid.x(i) - 0.25 * quad.nodes[q]));
    errs.push_back(relative_l2(f.values, exact));
  }
  EXPECT_GE(std::log2(errs[1] / errs[2]), 4.5);
  EXPECT_GE(std::log2(errs[0] / errs[2]) / 2.0, 4.5);
}

TEST(KineticSolve, BadArguments) {
  const PeriodicGrid grid{16};
  const Quadrature quad = gauss_legendre(4);
  const auto f0 = sine_field(grid, quad.size());
  const auto xs = CrossSections::constant(grid, 0, 0);
  EXPECT_THROW(kinetic_solve(f0, xs, quad, 0.0), DomainError);
  EXPECT_THROW(kinetic_solve(f0, xs, quad, 1.0, 1.5), DomainError);
  EXPECT_THROW(kinetic_solve(f0, CrossSections::constant(grid, -1, 0), quad, 1.0), DomainError);
}

TEST(KineticSolve, NonFiniteIsBlowUp) {
  const PeriodicGrid grid{16};
  const Quadrature quad = gauss_legendre(4);
  auto f0 = sine_field(grid, quad.size());
  f0.values(3, 1) = std::numeric_limits<double>::quiet_NaN();
  try {
    kinetic_solve(f0, CrossSections::constant(grid, 0, 0), quad, 1.0);
    FAIL() << "expected blow-up";
  } catch (const BlowUpError& e) {
    EXPECT_GT(e.time(), 0.0);
  }
}

TEST(TrainingSet, CountsAndSchema) {
  TrainingDataConfig cfg;
  cfg.runs = 2;
  cfg.sample_times = {0.5, 1.0};
  cfg.nx = 256;
  cfg.quad_points = 16;
  cfg.sigma_s_max = 2.0;
  const Dataset ds = generate_training_set(cfg, nullptr);
  EXPECT_EQ(ds.size(), 2 * 2 * 256);
  EXPECT_EQ(ds.moments.rows(), 7);
  EXPECT_EQ(ds.gradients.rows(), 8);
  EXPECT_TRUE(ds.moments.allFinite());
  EXPECT_TRUE(ds.gradients.allFinite());
  const auto header = io::split(dataset_header(6));
  EXPECT_EQ(header.size(), 7u + 8u + 3u);
  EXPECT_EQ(header.front(), "m_0");
  EXPECT_EQ(header[7], "dm_0");
  EXPECT_EQ(header.back(), "t");
}

TEST(TrainingSet, IsotropicConstantHasZeroGradients) {
  const PeriodicGrid grid{64};
  const Quadrature quad = gauss_legendre(16);
  Dataset ds{6, Eigen::MatrixXd(7, 0), Eigen::MatrixXd(8, 0), {}, {}, {}};
  auto f = isotropic_field(grid, quad.size(), [](double) { return 4.0; });
  kinetic_advance(f, CrossSections::constant(grid, 1, 1), quad, 0.5, 0.8);
  append_snapshot(ds, f, quad, 1, 1);
  EXPECT_EQ(ds.size(), 64);
  EXPECT_LT(ds.gradients.cwiseAbs().maxCoeff(), 1e-12);
}

TEST(TrainingSet, DeterministicAndPositive) {
  TrainingDataConfig cfg;
  cfg.runs = 1;
  cfg.nx = 64;
  cfg.quad_points = 8;
  cfg.sample_times = {0.25};
  cfg.sigma_s_max = 1.0;
  const Dataset a = generate_training_set(cfg, nullptr);
  const Dataset b = generate_training_set(cfg, nullptr);
  EXPECT_EQ(dataset_to_csv(a), dataset_to_csv(b));
  auto rng = run_rng(cfg.seed, 0);
  const RunDraw draw = draw_training_run(cfg, rng);
  EXPECT_GE(draw.sigma_s, cfg.sigma_s_min);
  EXPECT_LE(draw.sigma_s, cfg.sigma_s_max);
  for (int i = 0; i < 64; ++i) EXPECT_GT(draw.profile(i / 64.0), 0.0);
}

TEST(TrainingSet, CsvRoundTrip) {
  TrainingDataConfig cfg;
  cfg.runs = 1;
  cfg.nx = 32;
  cfg.quad_points = 8;
  cfg.n_order = 4;
  cfg.sample_times = {0.1};
  const Dataset a = generate_training_set(cfg, nullptr);
  const std::string path = ::testing::TempDir() + "ds.csv";
  io::write_file(path, dataset_to_csv(a));
  const Dataset b = dataset_from_csv(io::read_csv(path));
  EXPECT_EQ(b.n_order, 4);
  EXPECT_EQ(a.moments, b.moments);
  EXPECT_EQ(a.gradients, b.gradients);
  EXPECT_EQ(a.time, b.time);
}

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>

#include "mlclosure/experiments.hpp"

using namespace mlclosure;

namespace {

std::string temp_dir(const std::string& name) {
  const auto p = std::filesystem::temp_directory_path() / ("mlclosure_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p.string();
}

// Small P_N-only Gaussian experiment that runs in well under a second.
ExperimentSpec small_spec() {
  ExperimentSpec s;
  s.name = "small";
  s.example = "gaussian";
  s.modes = {ClosureMode::pn};
  s.initial.type = "gaussian";
  s.cross_sections.sigma_s = 1.0;
  s.cross_sections.sigma_a = 0.5;
  s.n_order = 4;
  s.nx = 32;
  s.quad_points = 16;
  s.snapshot_times = {0.05, 0.1};
  return s;
}

// Hyperbolic model with constant output, saved to dir.
std::string constant_model_file(const std::string& dir, int n) {
  MlpModel m = make_model(n, 1, 4, 3, HeadType::hyperbolic);
  for (auto& w : m.weights) w.setZero();
  for (auto& b : m.biases) b.setZero();
  m.biases.back() << 0.2, -0.1, 0.3, 0.05;
  const std::string path = dir + "/hyp.json";
  save_model(m, path);
  return path;
}

}  // namespace

TEST(Experiments, GitBlobHashMatchesGit) {
  EXPECT_EQ(git_blob_sha1(""), "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391");
  EXPECT_EQ(git_blob_sha1("hello\n"), "ce013625030ba8dba906f756967f9e9ca394464a");
}

TEST(Experiments, SpecRoundTripsThroughJson) {
  ExperimentSpec s = small_spec();
  s.initial.c1 = 0.75;
  s.eps_list = {0.2, 0.02};
  s.seed = 99;
  const ExperimentSpec r = spec_from_json(spec_to_json(s));
  EXPECT_EQ(spec_to_json(r), spec_to_json(s));
  EXPECT_EQ(r.initial.c1, 0.75);
  EXPECT_EQ(r.seed, 99u);
  EXPECT_EQ(r.modes, s.modes);
}

TEST(Experiments, ShippedConfigsParse) {
  for (const char* name : {"example1_const", "example2_gaussian", "example3_two_material", "example4_diffusion"}) {
    const ExperimentSpec s = load_spec(std::string(MLCLOSURE_SOURCE_DIR) + "/configs/" + name + ".json");
    EXPECT_EQ(s.name, name);
    EXPECT_EQ(s.n_order, 6);
  }
  const auto g = load_spec(std::string(MLCLOSURE_SOURCE_DIR) + "/configs/example2_gaussian.json");
  EXPECT_EQ(g.initial.c1, 0.5);
  EXPECT_EQ(g.initial.c2, 2.5);
  EXPECT_EQ(g.initial.x0, 0.5);
  EXPECT_EQ(g.initial.theta, 0.01);
}

TEST(Experiments, BadConfigsAreRejected) {
  ExperimentSpec s = small_spec();
  s.cross_sections.type = "two_material";
  s.cross_sections.x1 = 0.8;
  s.cross_sections.x2 = 0.4;
  EXPECT_THROW(s.validate(), DomainError);
  s = small_spec();
  s.modes = {ClosureMode::hyperbolic_ml};
  EXPECT_THROW(s.validate(), DomainError);
  s.hyperbolic_model = "/nonexistent/model.json";
  EXPECT_THROW(s.validate(), DomainError);
  EXPECT_THROW(spec_from_json(nlohmann::json{{"modes", {"weno"}}}), DomainError);
  EXPECT_THROW(spec_from_json(nlohmann::json{{"nx", "many"}}), DomainError);
}

TEST(Experiments, TwoMaterialCrossSections) {
  CrossSectionSpec c;
  c.type = "two_material";
  const PeriodicGrid g{256};
  const auto xs = build_cross_sections(c, g);
  EXPECT_EQ(xs.sigma_s[128], 1.0);        // x = 0.5
  EXPECT_EQ(xs.sigma_s[std::lround(0.1 * 256)], 10.0);
  EXPECT_EQ(xs.sigma_a.cwiseAbs().maxCoeff(), 0.0);
  const auto snapped = snap_interfaces(c, g);
  EXPECT_DOUBLE_EQ(snapped.x1, 76.5 / 256.0);
  EXPECT_DOUBLE_EQ(snapped.x2, 179.5 / 256.0);
  EXPECT_DOUBLE_EQ(snapped.x1 + snapped.x2, 1.0);
}

TEST(Experiments, GaussianInitialMoments) {
  ExperimentSpec s = small_spec();
  const PeriodicGrid g{64};
  const MomentField u = initial_moments(s, g);
  const double x = g.x(10);
  const double expect = 0.5 / std::sqrt(2.0 * std::numbers::pi * 0.01) * std::exp(-(x - 0.5) * (x - 0.5) / 0.02) + 2.5;
  EXPECT_DOUBLE_EQ(u.values(0, 10), expect);
  EXPECT_EQ(u.values.bottomRows(s.n_order).cwiseAbs().maxCoeff(), 0.0);
}

TEST(Experiments, HeldOutFourierDrawIsDeterministicAndPositive) {
  ExperimentSpec s = small_spec();
  s.initial = InitialSpec{};
  const PeriodicGrid g{64};
  const MomentField a = initial_moments(s, g), b = initial_moments(s, g);
  EXPECT_EQ(a.values, b.values);
  EXPECT_GT(a.values.row(0).minCoeff(), 0.0);
  s.initial.draw_index = 1;
  EXPECT_NE(initial_moments(s, g).values, a.values);
}

TEST(Experiments, ErrorTableIsRecomputableFromProfiles) {
  const auto rep = run_example(small_spec());
  const std::string dir = temp_dir("recompute");
  write_report(rep, dir);
  const io::CsvTable prof = io::read_csv(dir + "/profiles.csv");
  const int t = prof.column("t"), r0 = prof.column("ref_m0"), p0 = prof.column("pn_m0");
  const int r1 = prof.column("ref_m1"), p1 = prof.column("pn_m1");
  for (const auto& e : rep.errors) {
    ASSERT_TRUE(e.available);
    double num0 = 0, den0 = 0, num1 = 0, den1 = 0;
    for (const auto& row : prof.rows) {
      if (row[t] != e.t) continue;
      num0 += (row[p0] - row[r0]) * (row[p0] - row[r0]);
      den0 += row[r0] * row[r0];
      num1 += (row[p1] - row[r1]) * (row[p1] - row[r1]);
      den1 += row[r1] * row[r1];
    }
    EXPECT_NEAR(std::sqrt(num0 / den0), e.l2_m0, 1e-12 * e.l2_m0);
    EXPECT_NEAR(std::sqrt(num1 / den1), e.l2_m1, 1e-12 * e.l2_m1);
  }
  const std::string table = io::read_file(dir + "/errors.csv");
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), static_cast<long>(rep.errors.size()) + 1);
  EXPECT_TRUE(std::filesystem::exists(dir + "/metadata.json"));
}

TEST(Experiments, ReportsAreByteIdenticalAcrossRuns) {
  const auto a = run_example(small_spec());
  const auto b = run_example(small_spec());
  EXPECT_EQ(a.files, b.files);
  EXPECT_EQ(a.metadata.dump(), b.metadata.dump());
}

TEST(Experiments, MetadataCarriesConfigSeedAndModelHash) {
  const std::string dir = temp_dir("meta");
  ExperimentSpec s = small_spec();
  s.modes = {ClosureMode::pn, ClosureMode::hyperbolic_ml};
  s.hyperbolic_model = constant_model_file(dir, s.n_order);
  s.seed = 1234;
  const auto rep = run_example(s);
  EXPECT_EQ(rep.metadata["seed"], 1234);
  EXPECT_EQ(rep.metadata["config"], spec_to_json(s));
  EXPECT_EQ(rep.metadata["models"]["hyp"]["git_blob_sha1"], git_blob_sha1(io::read_file(s.hyperbolic_model)));
  EXPECT_EQ(spec_from_json(rep.metadata["config"]).initial.theta, s.initial.theta);
  const ModeRun* hyp = rep.find(ClosureMode::hyperbolic_ml, s.cross_sections.sigma_s);
  ASSERT_NE(hyp, nullptr);
  EXPECT_FALSE(hyp->outcome.blew_up);
  EXPECT_LE(hyp->outcome.max_imag_ratio, 1e-8);
}

TEST(Experiments, ModelWithWrongHeadOrOrderIsRejected) {
  const std::string dir = temp_dir("head");
  ExperimentSpec s = small_spec();
  s.modes = {ClosureMode::nonhyperbolic_ml};
  s.unconstrained_model = constant_model_file(dir, s.n_order);
  EXPECT_THROW(run_example(s), DomainError);
  s.modes = {ClosureMode::hyperbolic_ml};
  s.hyperbolic_model = s.unconstrained_model;
  s.n_order = 5;
  EXPECT_THROW(run_example(s), DimensionError);
}

TEST(Experiments, TwoMaterialSolutionIsMirrorSymmetric) {
  ExperimentSpec s = small_spec();
  s.example = "two_material";
  s.cross_sections.type = "two_material";
  s.nx = 64;
  s.snapshot_times = {0.1};
  const auto rep = run_example(s);
  ASSERT_EQ(rep.runs.size(), 1u);
  const auto& u = rep.runs[0].outcome.snapshots.at(0).values;
  const auto& ref = rep.reference.at(0).values;
  for (int i = 1; i < s.nx; ++i) {
    EXPECT_NEAR(u(0, i), u(0, s.nx - i), 1e-6);
    EXPECT_NEAR(u(1, i), -u(1, s.nx - i), 1e-6);
    EXPECT_NEAR(ref(0, i), ref(0, s.nx - i), 1e-6);
  }
  EXPECT_TRUE(rep.metadata.contains("snapped_interfaces"));
}

TEST(Experiments, DiffusionExampleTable) {
  ExperimentSpec s = small_spec();
  s.example = "diffusion";
  s.initial.type = "diffusion";
  s.cross_sections.sigma_a = 0.0;
  s.snapshot_times = {0.05};
  s.eps_list = {0.5, 0.1};
  const auto rep = run_example(s);
  const auto& rows = rep.diffusion.at(ClosureMode::pn).rows;
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_LT(rows[1].error, rows[0].error);
  const std::string& table = rep.files.at("diffusion_limit.csv");
  EXPECT_EQ(std::count(table.begin(), table.end(), '\n'), 3);
}

TEST(Experiments, UnknownExampleIsRejected) {
  ExperimentSpec s = small_spec();
  s.example = "three_body";
  EXPECT_THROW(run_example(s), DomainError);
}

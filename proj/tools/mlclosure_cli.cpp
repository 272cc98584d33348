// Command-line front end: data generation, training, simulation, checks and
// benchmark reports. Exit codes: 0 success, 1 error, 2 blow-up detected.

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "mlclosure/closure.hpp"
#include "mlclosure/diffusion.hpp"
#include "mlclosure/experiments.hpp"
#include "mlclosure/hyperbolicity.hpp"
#include "mlclosure/io.hpp"
#include "mlclosure/kinetic.hpp"
#include "mlclosure/momsolver.hpp"
#include "mlclosure/nn.hpp"

using namespace mlclosure;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitBlowUp = 2;

std::vector<double> parse_list(const std::string& s) {
  std::vector<double> out;
  for (const auto& f : io::split(s)) {
    if (f.empty()) continue;
    try {
      out.push_back(std::stod(f));
    } catch (const std::exception&) {
      throw DomainError("cannot parse '" + f + "' as a number");
    }
  }
  return out;
}

void ensure_parent(const std::string& path) {
  const auto parent = std::filesystem::path(path).parent_path();
  if (!parent.empty()) std::filesystem::create_directories(parent);
}

// ---------------------------------------------------------------- generate-data

struct GenerateOptions {
  std::string out = "data/train.csv";
  int runs = 100;
  int n_order = 6;
  int nx = 256;
  int quad_points = 64;
  std::uint64_t seed = 20211;
  std::string times = "0.25,0.5,0.75,1.0";
};

int cmd_generate(const GenerateOptions& o) {
  TrainingDataConfig cfg;
  cfg.runs = o.runs;
  cfg.n_order = o.n_order;
  cfg.nx = o.nx;
  cfg.quad_points = o.quad_points;
  cfg.seed = o.seed;
  cfg.sample_times = parse_list(o.times);
  const Dataset ds = generate_training_set(cfg, &std::cerr);
  ensure_parent(o.out);
  const std::string csv = dataset_to_csv(ds);
  io::write_file(o.out, csv);
  nlohmann::json meta;
  meta["format"] = "mlclosure-dataset";
  meta["samples"] = ds.size();
  meta["git_blob_sha1"] = git_blob_sha1(csv);
  meta["config"] = {{"runs", cfg.runs},
                    {"n_order", cfg.n_order},
                    {"nx", cfg.nx},
                    {"quad_points", cfg.quad_points},
                    {"cfl", cfg.cfl},
                    {"sample_times", cfg.sample_times},
                    {"fourier_degree", cfg.fourier_degree},
                    {"offset_range", {cfg.offset_min, cfg.offset_max}},
                    {"sigma_s_range", {cfg.sigma_s_min, cfg.sigma_s_max}},
                    {"sigma_a_choices", cfg.sigma_a_choices},
                    {"seed", cfg.seed}};
  io::write_file(o.out + ".meta.json", meta.dump(2) + "\n");
  std::cout << "wrote " << ds.size() << " samples to " << o.out << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- train

struct TrainOptions {
  std::string data;
  std::string out = "models/hyperbolic.json";
  std::string head = "hyperbolic";
  std::string sigma = "softplus";
  std::string loss = "relative";
  std::string schedule = "constant";
  TrainConfig cfg;
};

int cmd_train(TrainOptions o) {
  o.cfg.head = head_type_from_string(o.head);
  o.cfg.sigma_fn = sigma_fn_from_string(o.sigma);
  o.cfg.loss = loss_kind_from_string(o.loss);
  o.cfg.schedule = lr_schedule_from_string(o.schedule);
  const Dataset ds = dataset_from_csv(io::read_csv(o.data));
  const TrainResult r = train(ds, o.cfg, &std::cerr);
  ensure_parent(o.out);
  save_model(r.model, o.out);
  std::string hist = "epoch,train_loss,validation_loss\n";
  for (std::size_t e = 0; e < r.train_loss.size(); ++e)
    hist += io::join({std::to_string(e), io::format_double(r.train_loss[e]),
                      io::format_double(r.validation_loss[e])}) +
            "\n";
  io::write_file(o.out + ".loss.csv", hist);
  std::cout << "best epoch " << r.best_epoch << ", validation loss "
            << io::format_double(r.validation_loss.at(r.best_epoch)) << ", model " << o.out << " ("
            << git_blob_sha1(io::read_file(o.out)) << ")\n";
  return kExitOk;
}

// ---------------------------------------------------------------- simulate

struct SimulateOptions {
  std::string config;
  std::string mode = "hyp";
  std::string model;
  double t_end = -1.0;
  double epsilon = -1.0;
  std::string out = "out/simulate";
};

int cmd_simulate(const SimulateOptions& o) {
  ExperimentSpec s = load_spec(o.config);
  const ClosureMode mode = closure_mode_from_string(o.mode);
  if (!o.model.empty()) (mode == ClosureMode::hyperbolic_ml ? s.hyperbolic_model : s.unconstrained_model) = o.model;
  s.modes = {mode};
  s.validate();
  const PeriodicGrid grid{s.nx};
  const CrossSections xs = build_cross_sections(s.cross_sections, grid);
  const Closure closure = load_closure(mode, s);
  SolverConfig cfg = SolverConfig::for_mode(mode, s.nx);
  std::vector<double> times = s.snapshot_times;
  cfg.t_end = o.t_end > 0.0 ? o.t_end : *std::max_element(times.begin(), times.end());
  std::erase_if(times, [&](double t) { return t > cfg.t_end; });
  if (o.epsilon > 0.0) {
    cfg.diffusive = true;
    cfg.epsilon = o.epsilon;
  }
  const SolveOutcome out = solve(initial_moments(s, grid), closure, xs, cfg, times);

  std::filesystem::create_directories(o.out);
  std::vector<std::string> head{"t", "x"};
  for (int k = 0; k <= s.n_order; ++k) head.push_back("m_" + std::to_string(k));
  std::string csv = io::join(head) + "\n";
  std::vector<MomentField> snaps = out.snapshots;
  if (snaps.empty() || snaps.back().time != out.state.time) snaps.push_back(out.state);
  for (const auto& f : snaps)
    for (int i = 0; i < grid.nx; ++i) {
      std::vector<std::string> row{io::format_double(f.time), io::format_double(grid.x(i))};
      for (int k = 0; k <= s.n_order; ++k) row.push_back(io::format_double(f.values(k, i)));
      csv += io::join(row) + "\n";
    }
  io::write_file(o.out + "/moments.csv", csv);
  io::write_file(o.out + "/trace.csv", detail::trace_csv(out));
  nlohmann::json meta = detail::base_metadata(s);
  meta["mode"] = to_string(mode);
  meta["t_end"] = cfg.t_end;
  meta["steps"] = out.steps;
  meta["blew_up"] = out.blew_up;
  if (out.blew_up) {
    meta["blowup_time"] = out.blowup_time;
    meta["blowup_reason"] = out.blowup_reason;
  }
  io::write_file(o.out + "/metadata.json", meta.dump(2) + "\n");
  if (out.blew_up) {
    std::cout << "blow-up at t = " << io::format_double(out.blowup_time) << ": " << out.blowup_reason << "\n";
    return kExitBlowUp;
  }
  std::cout << "completed t = " << io::format_double(out.state.time) << " in " << out.steps << " steps\n";
  return kExitOk;
}

// ---------------------------------------------------------------- check-hyperbolicity

struct CheckOptions {
  std::string model;
  std::string coeffs;
  int n_order = 6;
  int samples = 1000;
  std::uint64_t seed = 1;
  std::string data;
  std::string out;
};

std::vector<std::string> check_row(const ClosureCoefficients& c) {
  const int n = c.n_order;
  const auto h = constraint_check_h(c.n3(), c.n2(), c.n1(), c.n0(), n);
  const Eigen::VectorXd a = closure_row(c);
  const auto g = constraint_check_g(a[n - 3], a[n - 2], a[n - 1], a[n], n);
  bool spd = false;
  double residual = std::numeric_limits<double>::quiet_NaN();
  if (h.satisfied) {
    try {
      const SymmetrizerResult sym = symmetrizer_k3(a, n);
      spd = sym.spd.cholesky_ok && sym.spd.minors_ok;
      residual = sym.symmetry_residual_relative;
    } catch (const Error&) {
      spd = false;
    }
  }
  const EigenReport e = is_real_diagonalizable(assemble_matrix(c));
  return {std::to_string(n),
          io::format_double(c.n3()),
          io::format_double(c.n2()),
          io::format_double(c.n1()),
          io::format_double(c.n0()),
          h.satisfied ? "1" : "0",
          g.satisfied ? "1" : "0",
          io::format_double(h.first_margin),
          io::format_double(h.second_margin),
          spd ? "1" : "0",
          io::format_double(residual),
          e.real_diagonalizable ? "1" : "0",
          io::format_double(e.max_imag),
          io::format_double(e.spectral_radius)};
}

int cmd_check(const CheckOptions& o) {
  std::string csv =
      "n,N_n3,N_n2,N_n1,N_n0,h_form,a_form,first_margin,second_margin,spd,symmetry_residual,real_diagonalizable,"
      "max_imag,spectral_radius\n";
  long total = 0, hyperbolic = 0;
  auto add = [&](const ClosureCoefficients& c) {
    const auto row = check_row(c);
    csv += io::join(row) + "\n";
    ++total;
    if (row[5] == "1" && row[9] == "1" && row[11] == "1") ++hyperbolic;
  };
  if (!o.coeffs.empty()) {
    const auto v = parse_list(o.coeffs);
    if (v.size() != 4) throw DomainError("--coeffs needs four values N_{N-3},N_{N-2},N_{N-1},N_N");
    add(ClosureCoefficients{o.n_order, 4, {v[0], v[1], v[2], v[3]}});
  } else if (!o.model.empty()) {
    const MlpModel m = load_model(o.model);
    if (!o.data.empty()) {
      const Dataset ds = dataset_from_csv(io::read_csv(o.data));
      if (ds.n_order != m.n_order) throw DimensionError("dataset and model orders differ");
      const int step = std::max(1, ds.size() / std::max(1, o.samples));
      for (int j = 0; j < ds.size(); j += step) add(model_closure(m, ds.moments.col(j)));
    } else {
      std::mt19937_64 rng(o.seed);
      std::uniform_real_distribution<double> u(-1.0, 1.0);
      for (int j = 0; j < o.samples; ++j) {
        Eigen::VectorXd mom(m.n_order + 1);
        mom[0] = 3.5 + 1.5 * u(rng);
        for (int k = 1; k <= m.n_order; ++k) mom[k] = 0.5 * mom[0] * u(rng);
        add(model_closure(m, mom));
      }
    }
  } else {
    throw DomainError("check-hyperbolicity needs --coeffs or --model");
  }
  if (!o.out.empty()) {
    ensure_parent(o.out);
    io::write_file(o.out, csv);
  } else {
    std::cout << csv;
  }
  std::cerr << hyperbolic << " of " << total << " closures certified hyperbolic\n";
  return kExitOk;
}

// ---------------------------------------------------------------- diffusion-limit

struct DiffusionOptions {
  std::string model;
  std::string eps = "0.5,0.1,0.05,0.01";
  std::string out = "out/diffusion_limit.csv";
  int nx = 256;
  int n_order = 6;
  double t_end = 0.1;
  double sigma_s = 1.0;
  double sigma_a = 0.0;
};

int cmd_diffusion(const DiffusionOptions& o) {
  Closure closure = Closure::pn(o.n_order);
  ClosureMode mode = ClosureMode::pn;
  if (!o.model.empty()) {
    closure = Closure::learned(load_model(o.model));
    mode = closure.mode();
  }
  const PeriodicGrid grid{o.nx};
  const auto study = diffusion_limit_study(closure, CrossSections::constant(grid, o.sigma_s, o.sigma_a),
                                           parse_list(o.eps), o.t_end, grid, SolverConfig::for_mode(mode, o.nx));
  std::string csv = "epsilon,error,m2_ratio,flux_deviation,blew_up\n";
  bool blew = false;
  for (const auto& r : study.rows) {
    csv += io::join({io::format_double(r.epsilon), io::format_double(r.error), io::format_double(r.m2_ratio),
                     io::format_double(r.flux_deviation), r.blew_up ? "1" : "0"}) +
           "\n";
    blew = blew || r.blew_up;
  }
  ensure_parent(o.out);
  io::write_file(o.out, csv);
  std::cout << csv;
  return blew ? kExitBlowUp : kExitOk;
}

// ---------------------------------------------------------------- benchmark / report

struct BenchmarkOptions {
  std::string example;
  std::string config;
  std::string out;
  std::string hyperbolic_model;
  std::string unconstrained_model;
};

std::string default_config(const std::string& example) {
  static const std::vector<std::pair<std::string, std::string>> names{
      {"const", "example1_const"},   {"example1", "example1_const"},          {"gaussian", "example2_gaussian"},
      {"example2", "example2_gaussian"}, {"two_material", "example3_two_material"}, {"example3", "example3_two_material"},
      {"diffusion", "example4_diffusion"}, {"example4", "example4_diffusion"}};
  for (const auto& [k, v] : names)
    if (k == example || v == example) return "configs/" + v + ".json";
  throw DomainError("unknown example '" + example + "'");
}

int cmd_benchmark(const BenchmarkOptions& o) {
  ExperimentSpec s = load_spec(o.config.empty() ? default_config(o.example) : o.config);
  if (!o.out.empty()) s.output_dir = o.out;
  if (!o.hyperbolic_model.empty()) s.hyperbolic_model = o.hyperbolic_model;
  if (!o.unconstrained_model.empty()) s.unconstrained_model = o.unconstrained_model;
  const ExperimentReport rep = run_example(s, &std::cerr);
  write_report(rep, s.output_dir);
  std::cout << "report written to " << s.output_dir << "\n";
  return rep.any_blowup() ? kExitBlowUp : kExitOk;
}

int cmd_report(const std::string& dir) {
  const nlohmann::json meta = nlohmann::json::parse(io::read_file(dir + "/metadata.json"));
  std::cout << "experiment " << meta.value("name", std::string("?")) << " (" << meta.value("example", std::string("?"))
            << "), seed " << meta.value("seed", 0) << "\n";
  for (const auto& [mode, m] : meta["models"].items())
    std::cout << "  model " << mode << ": " << m.value("path", std::string()) << " " << m.value("git_blob_sha1", std::string())
              << "\n";
  for (const char* name : {"errors.csv", "outcomes.csv", "diffusion_limit.csv"}) {
    const std::string path = dir + "/" + name;
    if (!std::filesystem::exists(path)) continue;
    std::cout << "\n" << name << "\n" << io::read_file(path);
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ML gradient closures for the 1D slab radiative transfer equation"};
  app.require_subcommand(1);

  GenerateOptions gen;
  auto* g = app.add_subcommand("generate-data", "Kinetic runs -> training samples (CSV + metadata sidecar)");
  g->add_option("--out", gen.out, "Output CSV")->capture_default_str();
  g->add_option("--runs", gen.runs, "Number of kinetic runs")->capture_default_str();
  g->add_option("--n", gen.n_order, "Moment order N")->capture_default_str();
  g->add_option("--nx", gen.nx, "Grid points")->capture_default_str();
  g->add_option("--quad", gen.quad_points, "Velocity quadrature points")->capture_default_str();
  g->add_option("--seed", gen.seed, "Seed")->capture_default_str();
  g->add_option("--times", gen.times, "Sample times, comma separated")->capture_default_str();

  TrainOptions tr;
  auto* t = app.add_subcommand("train", "Train a closure network");
  t->add_option("--data", tr.data, "Training CSV")->required();
  t->add_option("--out", tr.out, "Model file")->capture_default_str();
  t->add_option("--head", tr.head, "hyperbolic | unconstrained")->capture_default_str();
  t->add_option("--sigma", tr.sigma, "softplus | exp | square")->capture_default_str();
  t->add_option("--loss", tr.loss, "relative | mse")->capture_default_str();
  t->add_option("--schedule", tr.schedule, "constant | cosine")->capture_default_str();
  t->add_option("--epochs", tr.cfg.epochs)->capture_default_str();
  t->add_option("--batch", tr.cfg.batch_size)->capture_default_str();
  t->add_option("--lr", tr.cfg.learning_rate)->capture_default_str();
  t->add_option("--layers", tr.cfg.hidden_layers)->capture_default_str();
  t->add_option("--width", tr.cfg.width)->capture_default_str();
  t->add_option("--k-dof", tr.cfg.k_dof, "Closure coefficients used (2, 3 or 4)")->capture_default_str();
  t->add_option("--validation", tr.cfg.validation_fraction)->capture_default_str();
  t->add_option("--seed", tr.cfg.seed)->capture_default_str();
  t->add_option("--log-every", tr.cfg.log_every)->capture_default_str();

  SimulateOptions sim;
  auto* s = app.add_subcommand("simulate", "Run one closure mode from an experiment config");
  s->add_option("--config", sim.config, "Experiment config")->required();
  s->add_option("--mode", sim.mode, "pn | hyp | nonhyp")->capture_default_str();
  s->add_option("--model", sim.model, "Model file overriding the config");
  s->add_option("--t-end", sim.t_end, "Final time (default: last snapshot)");
  s->add_option("--epsilon", sim.epsilon, "Knudsen number for diffusive scaling");
  s->add_option("--out", sim.out, "Output directory")->capture_default_str();

  CheckOptions chk;
  auto* c = app.add_subcommand("check-hyperbolicity", "Constraint, symmetrizer and eigenvalue checks");
  c->add_option("--coeffs", chk.coeffs, "N_{N-3},N_{N-2},N_{N-1},N_N");
  c->add_option("--n", chk.n_order, "Moment order for --coeffs")->capture_default_str();
  c->add_option("--model", chk.model, "Model file");
  c->add_option("--data", chk.data, "Dataset whose moments are fed to the model");
  c->add_option("--samples", chk.samples)->capture_default_str();
  c->add_option("--seed", chk.seed)->capture_default_str();
  c->add_option("--out", chk.out, "CSV output (default stdout)");

  DiffusionOptions dif;
  auto* d = app.add_subcommand("diffusion-limit", "Epsilon sweep against the diffusion equation");
  d->add_option("--model", dif.model, "Model file (default: P_N)");
  d->add_option("--eps", dif.eps)->capture_default_str();
  d->add_option("--out", dif.out)->capture_default_str();
  d->add_option("--nx", dif.nx)->capture_default_str();
  d->add_option("--n", dif.n_order, "Order for P_N")->capture_default_str();
  d->add_option("--t-end", dif.t_end)->capture_default_str();
  d->add_option("--sigma-s", dif.sigma_s)->capture_default_str();
  d->add_option("--sigma-a", dif.sigma_a)->capture_default_str();

  BenchmarkOptions bench;
  auto* b = app.add_subcommand("benchmark", "Run one of the shipped examples");
  b->add_option("example", bench.example, "const | gaussian | two_material | diffusion")->required();
  b->add_option("--config", bench.config, "Config file (default: configs/<example>.json)");
  b->add_option("--out", bench.out, "Output directory");
  b->add_option("--hyperbolic-model", bench.hyperbolic_model);
  b->add_option("--unconstrained-model", bench.unconstrained_model);

  std::string report_dir;
  auto* r = app.add_subcommand("report", "Summarize a benchmark output directory");
  r->add_option("dir", report_dir)->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (g->parsed()) return cmd_generate(gen);
    if (t->parsed()) return cmd_train(tr);
    if (s->parsed()) return cmd_simulate(sim);
    if (c->parsed()) return cmd_check(chk);
    if (d->parsed()) return cmd_diffusion(dif);
    if (b->parsed()) return cmd_benchmark(bench);
    if (r->parsed()) return cmd_report(report_dir);
  } catch (const BlowUpError& e) {
    std::cerr << "blow-up: " << e.what() << "\n";
    return kExitBlowUp;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}

#pragma once

// Benchmark experiments: configuration, kinetic reference runs, closure
// comparisons and CSV reports.

#include <openssl/sha.h>

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "mlclosure/diffusion.hpp"
#include "mlclosure/errors.hpp"
#include "mlclosure/io.hpp"
#include "mlclosure/kinetic.hpp"
#include "mlclosure/legendre.hpp"
#include "mlclosure/momsolver.hpp"
#include "mlclosure/nn.hpp"

namespace mlclosure {

/// Content hash as computed by `git hash-object`.
inline std::string git_blob_sha1(const std::string& content) {
  const std::string blob = "blob " + std::to_string(content.size()) + '\0' + content;
  unsigned char digest[SHA_DIGEST_LENGTH];
  SHA1(reinterpret_cast<const unsigned char*>(blob.data()), blob.size(), digest);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned char c : digest) {
    out += hex[c >> 4];
    out += hex[c & 15];
  }
  return out;
}

struct InitialSpec {
  std::string type = "fourier";  // fourier | gaussian | diffusion
  bool explicit_fourier = false;
  FourierProfile fourier;        // used when explicit_fourier
  int draw_index = 0;            // otherwise drawn from the training distribution
  double c1 = 0.5;
  double c2 = 2.5;
  double x0 = 0.5;
  double theta = 0.01;
};

struct CrossSectionSpec {
  std::string type = "constant";  // constant | two_material
  double sigma_s = 1.0;
  double sigma_a = 1.0;
  double x1 = 0.3;
  double x2 = 0.7;
  double sigma_s1 = 1.0;
  double sigma_s2 = 10.0;
  double sigma_a1 = 0.0;
  double sigma_a2 = 0.0;
};

struct ExperimentSpec {
  std::string name = "experiment";
  std::string example = "const";  // const | gaussian | two_material | diffusion
  std::vector<ClosureMode> modes{ClosureMode::pn, ClosureMode::hyperbolic_ml, ClosureMode::nonhyperbolic_ml};
  InitialSpec initial;
  CrossSectionSpec cross_sections;
  int n_order = 6;
  int nx = 256;
  int quad_points = 64;
  std::vector<double> snapshot_times{0.5, 1.0};
  std::vector<double> sigma_sweep;   // const: extra sigma_s values (sigma_a kept)
  std::vector<double> sweep_times{0.5, 1.0};
  std::vector<double> eps_list{0.5, 0.1, 0.05, 0.01};
  std::uint64_t seed = 7;
  std::string output_dir = "out";
  std::string hyperbolic_model;
  std::string unconstrained_model;

  void validate() const {
    if (n_order < 3) throw DomainError("experiment: N must be >= 3");
    if (nx < 8) throw DomainError("experiment: nx must be >= 8");
    if (modes.empty()) throw DomainError("experiment: no closure modes");
    if (example != "diffusion" && snapshot_times.empty()) throw DomainError("experiment: no snapshot times");
    for (double t : snapshot_times)
      if (!(t > 0.0)) throw DomainError("experiment: snapshot times must be positive");
    if (cross_sections.type == "two_material" &&
        !(0.0 < cross_sections.x1 && cross_sections.x1 < cross_sections.x2 && cross_sections.x2 < 1.0))
      throw DomainError("experiment: two-material requires 0 < x1 < x2 < 1");
    if (cross_sections.type != "constant" && cross_sections.type != "two_material")
      throw DomainError("experiment: unknown cross-section type '" + cross_sections.type + "'");
    if (initial.type != "fourier" && initial.type != "gaussian" && initial.type != "diffusion")
      throw DomainError("experiment: unknown initial condition '" + initial.type + "'");
    for (ClosureMode m : modes) {
      const std::string& path = m == ClosureMode::hyperbolic_ml   ? hyperbolic_model
                                : m == ClosureMode::nonhyperbolic_ml ? unconstrained_model
                                                                     : std::string("-");
      if (path.empty()) throw DomainError("experiment: mode " + to_string(m) + " needs a model file");
      if (path != "-" && !std::filesystem::exists(path))
        throw DomainError("experiment: model file '" + path + "' does not exist");
    }
  }
};

inline nlohmann::json spec_to_json(const ExperimentSpec& s) {
  nlohmann::json j;
  j["name"] = s.name;
  j["example"] = s.example;
  std::vector<std::string> modes;
  for (ClosureMode m : s.modes) modes.push_back(to_string(m));
  j["modes"] = modes;
  nlohmann::json ic;
  ic["type"] = s.initial.type;
  if (s.initial.type == "fourier") {
    if (s.initial.explicit_fourier) {
      ic["offset"] = s.initial.fourier.offset;
      ic["cos"] = s.initial.fourier.cos_coeffs;
      ic["sin"] = s.initial.fourier.sin_coeffs;
    } else {
      ic["draw_index"] = s.initial.draw_index;
    }
  } else if (s.initial.type == "gaussian") {
    ic["c1"] = s.initial.c1;
    ic["c2"] = s.initial.c2;
    ic["x0"] = s.initial.x0;
    ic["theta"] = s.initial.theta;
  }
  j["initial"] = ic;
  const CrossSectionSpec& c = s.cross_sections;
  nlohmann::json xs;
  xs["type"] = c.type;
  if (c.type == "constant") {
    xs["sigma_s"] = c.sigma_s;
    xs["sigma_a"] = c.sigma_a;
  } else {
    xs["x1"] = c.x1;
    xs["x2"] = c.x2;
    xs["sigma_s1"] = c.sigma_s1;
    xs["sigma_s2"] = c.sigma_s2;
    xs["sigma_a1"] = c.sigma_a1;
    xs["sigma_a2"] = c.sigma_a2;
  }
  j["cross_sections"] = xs;
  j["n_order"] = s.n_order;
  j["nx"] = s.nx;
  j["quad_points"] = s.quad_points;
  j["snapshot_times"] = s.snapshot_times;
  j["sigma_sweep"] = s.sigma_sweep;
  j["sweep_times"] = s.sweep_times;
  j["eps_list"] = s.eps_list;
  j["seed"] = s.seed;
  j["output_dir"] = s.output_dir;
  j["models"] = {{"hyperbolic", s.hyperbolic_model}, {"unconstrained", s.unconstrained_model}};
  return j;
}

/// Missing keys keep their defaults.
inline ExperimentSpec spec_from_json(const nlohmann::json& j) {
  ExperimentSpec s;
  try {
    s.name = j.value("name", s.name);
    s.example = j.value("example", s.example);
    if (j.contains("modes")) {
      s.modes.clear();
      for (const auto& m : j.at("modes")) s.modes.push_back(closure_mode_from_string(m.get<std::string>()));
    }
    if (j.contains("initial")) {
      const auto& ic = j.at("initial");
      s.initial.type = ic.value("type", s.initial.type);
      if (ic.contains("offset")) {
        s.initial.explicit_fourier = true;
        s.initial.fourier.offset = ic.at("offset").get<double>();
        s.initial.fourier.cos_coeffs = ic.value("cos", std::vector<double>{});
        s.initial.fourier.sin_coeffs = ic.value("sin", std::vector<double>{});
        if (s.initial.fourier.cos_coeffs.size() != s.initial.fourier.sin_coeffs.size())
          throw DomainError("experiment: cos and sin coefficient lists differ in length");
      }
      s.initial.draw_index = ic.value("draw_index", s.initial.draw_index);
      s.initial.c1 = ic.value("c1", s.initial.c1);
      s.initial.c2 = ic.value("c2", s.initial.c2);
      s.initial.x0 = ic.value("x0", s.initial.x0);
      s.initial.theta = ic.value("theta", s.initial.theta);
    }
    if (j.contains("cross_sections")) {
      const auto& x = j.at("cross_sections");
      CrossSectionSpec& c = s.cross_sections;
      c.type = x.value("type", c.type);
      c.sigma_s = x.value("sigma_s", c.sigma_s);
      c.sigma_a = x.value("sigma_a", c.sigma_a);
      c.x1 = x.value("x1", c.x1);
      c.x2 = x.value("x2", c.x2);
      c.sigma_s1 = x.value("sigma_s1", c.sigma_s1);
      c.sigma_s2 = x.value("sigma_s2", c.sigma_s2);
      c.sigma_a1 = x.value("sigma_a1", c.sigma_a1);
      c.sigma_a2 = x.value("sigma_a2", c.sigma_a2);
    }
    s.n_order = j.value("n_order", s.n_order);
    s.nx = j.value("nx", s.nx);
    s.quad_points = j.value("quad_points", s.quad_points);
    s.snapshot_times = j.value("snapshot_times", s.snapshot_times);
    s.sigma_sweep = j.value("sigma_sweep", s.sigma_sweep);
    s.sweep_times = j.value("sweep_times", s.sweep_times);
    s.eps_list = j.value("eps_list", s.eps_list);
    s.seed = j.value("seed", s.seed);
    s.output_dir = j.value("output_dir", s.output_dir);
    if (j.contains("models")) {
      s.hyperbolic_model = j.at("models").value("hyperbolic", s.hyperbolic_model);
      s.unconstrained_model = j.at("models").value("unconstrained", s.unconstrained_model);
    }
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(std::string("experiment config: ") + e.what());
  }
  return s;
}

inline ExperimentSpec load_spec(const std::string& path) {
  try {
    return spec_from_json(nlohmann::json::parse(io::read_file(path)));
  } catch (const nlohmann::json::exception& e) {
    throw DomainError(path + ": " + e.what());
  }
}

/// Interfaces snapped to the nearest cell boundary (i + 1/2) dx.
struct SnappedInterfaces {
  double x1 = 0.0;
  double x2 = 0.0;
};

inline SnappedInterfaces snap_interfaces(const CrossSectionSpec& c, const PeriodicGrid& grid) {
  auto snap = [&](double x) { return (std::round(x * grid.nx - 0.5) + 0.5) * grid.dx(); };
  return {snap(c.x1), snap(c.x2)};
}

inline CrossSections build_cross_sections(const CrossSectionSpec& c, const PeriodicGrid& grid) {
  if (c.type == "constant") return CrossSections::constant(grid, c.sigma_s, c.sigma_a);
  const SnappedInterfaces s = snap_interfaces(c, grid);
  auto inside = [s](double x) { return s.x1 < x && x < s.x2; };
  return CrossSections::from_functions(
      grid, [&](double x) { return inside(x) ? c.sigma_s1 : c.sigma_s2; },
      [&](double x) { return inside(x) ? c.sigma_a1 : c.sigma_a2; });
}

/// Isotropic initial intensity of the experiment.
inline std::function<double(double)> build_initial_profile(const ExperimentSpec& s) {
  const InitialSpec& ic = s.initial;
  if (ic.type == "gaussian") {
    const double c1 = ic.c1, c2 = ic.c2, x0 = ic.x0, th = ic.theta;
    return [=](double x) {
      return c1 / std::sqrt(2.0 * std::numbers::pi * th) * std::exp(-(x - x0) * (x - x0) / (2.0 * th)) + c2;
    };
  }
  if (ic.type == "diffusion") return [](double x) { return std::sin(2.0 * std::numbers::pi * x) + 2.0; };
  FourierProfile p = ic.fourier;
  if (!ic.explicit_fourier) {
    TrainingDataConfig cfg;
    cfg.nx = s.nx;
    auto rng = run_rng(s.seed, ic.draw_index);
    p = draw_training_run(cfg, rng).profile;
  }
  return [p](double x) { return p(x); };
}

inline MomentField initial_moments(const ExperimentSpec& s, const PeriodicGrid& grid) {
  MomentField u = make_moment_field(s.n_order, grid);
  const auto f = build_initial_profile(s);
  for (int i = 0; i < grid.nx; ++i) u.values(0, i) = f(grid.x(i));
  return u;
}

/// P_N, or the model file matching the mode's head.
inline Closure load_closure(ClosureMode mode, const ExperimentSpec& s) {
  if (mode == ClosureMode::pn) return Closure::pn(s.n_order);
  const std::string& path = mode == ClosureMode::hyperbolic_ml ? s.hyperbolic_model : s.unconstrained_model;
  MlpModel m = load_model(path);
  if (m.n_order != s.n_order)
    throw DimensionError("model " + path + " has N = " + std::to_string(m.n_order) + ", experiment uses " +
                         std::to_string(s.n_order));
  const HeadType want = mode == ClosureMode::hyperbolic_ml ? HeadType::hyperbolic : HeadType::unconstrained;
  if (m.head != want) throw DomainError("model " + path + " has the wrong head for mode " + to_string(mode));
  return Closure::learned(std::move(m));
}

struct ModeRun {
  ClosureMode mode = ClosureMode::pn;
  double sigma_s = 0.0;
  SolveOutcome outcome;
};

struct ErrorRow {
  ClosureMode mode = ClosureMode::pn;
  double sigma_s = 0.0;
  double t = 0.0;
  bool available = false;  // false when the run blew up before t
  double l2_m0 = 0.0, linf_m0 = 0.0, l2_m1 = 0.0, linf_m1 = 0.0;
};

struct ExperimentReport {
  std::string name;
  nlohmann::json metadata;
  std::vector<MomentField> reference;  // kinetic moments at the snapshot times
  std::vector<ModeRun> runs;
  std::vector<ErrorRow> errors;        // main runs and the sigma_s sweep
  std::map<ClosureMode, DiffusionLimitStudy> diffusion;
  std::map<std::string, std::string> files;  // file name -> content

  bool any_blowup() const {
    for (const auto& r : runs)
      if (r.outcome.blew_up) return true;
    for (const auto& [m, d] : diffusion)
      for (const auto& row : d.rows)
        if (row.blew_up) return true;
    return false;
  }

  const ModeRun* find(ClosureMode mode, double sigma_s) const {
    for (const auto& r : runs)
      if (r.mode == mode && r.sigma_s == sigma_s) return &r;
    return nullptr;
  }

  const ErrorRow* error(ClosureMode mode, double sigma_s, double t) const {
    for (const auto& e : errors)
      if (e.mode == mode && e.sigma_s == sigma_s && e.t == t) return &e;
    return nullptr;
  }
};

namespace detail {

inline std::vector<MomentField> kinetic_reference(const ExperimentSpec& s, const PeriodicGrid& grid,
                                                  const CrossSections& xs, std::vector<double> times) {
  std::sort(times.begin(), times.end());
  const Quadrature quad = gauss_legendre(s.quad_points);
  KineticField f = isotropic_field(grid, quad.size(), build_initial_profile(s));
  std::vector<MomentField> out;
  for (double t : times) {
    kinetic_advance(f, xs, quad, t, 0.8);
    out.push_back(moments_from_kinetic(f, quad, s.n_order));
  }
  return out;
}

inline ErrorRow compare(ClosureMode mode, double sigma_s, const MomentField& ref, const SolveOutcome& o) {
  ErrorRow e;
  e.mode = mode;
  e.sigma_s = sigma_s;
  e.t = ref.time;
  for (const auto& snap : o.snapshots) {
    if (snap.time != ref.time) continue;
    const ErrorMetrics m = error_metrics(snap.values.topRows(2), ref.values.topRows(2));
    e.available = true;
    e.l2_m0 = m.relative_l2[0];
    e.linf_m0 = m.relative_linf[0];
    e.l2_m1 = m.relative_l2[1];
    e.linf_m1 = m.relative_linf[1];
  }
  return e;
}

inline std::string errors_csv(const std::vector<ErrorRow>& rows) {
  std::string out = "mode,sigma_s,t,available,rel_l2_m0,rel_linf_m0,rel_l2_m1,rel_linf_m1\n";
  for (const auto& e : rows) {
    out += io::join({to_string(e.mode), io::format_double(e.sigma_s), io::format_double(e.t),
                     e.available ? "1" : "0", io::format_double(e.l2_m0), io::format_double(e.linf_m0),
                     io::format_double(e.l2_m1), io::format_double(e.linf_m1)}) +
           "\n";
  }
  return out;
}

/// Long format: one row per (t, x) with the reference and every mode's m_0, m_1.
inline std::string profiles_csv(const std::vector<MomentField>& ref, const std::vector<ModeRun>& runs,
                                double sigma_s) {
  std::vector<std::string> head{"t", "x", "ref_m0", "ref_m1"};
  std::vector<const ModeRun*> sel;
  for (const auto& r : runs) {
    if (r.sigma_s != sigma_s) continue;
    sel.push_back(&r);
    head.push_back(to_string(r.mode) + "_m0");
    head.push_back(to_string(r.mode) + "_m1");
  }
  std::string out = io::join(head) + "\n";
  for (const auto& rf : ref) {
    std::vector<const MomentField*> snaps;
    for (const ModeRun* r : sel) {
      const MomentField* p = nullptr;
      for (const auto& s : r->outcome.snapshots)
        if (s.time == rf.time) p = &s;
      snaps.push_back(p);
    }
    for (int i = 0; i < rf.grid.nx; ++i) {
      std::vector<std::string> row{io::format_double(rf.time), io::format_double(rf.grid.x(i)),
                                   io::format_double(rf.values(0, i)), io::format_double(rf.values(1, i))};
      for (const MomentField* p : snaps) {
        const double nan = std::numeric_limits<double>::quiet_NaN();
        row.push_back(io::format_double(p ? p->values(0, i) : nan));
        row.push_back(io::format_double(p ? p->values(1, i) : nan));
      }
      out += io::join(row) + "\n";
    }
  }
  return out;
}

inline std::string trace_csv(const SolveOutcome& o) {
  std::string out = "t,c_max,max_imag\n";
  for (const auto& r : o.trace)
    out += io::join({io::format_double(r.t), io::format_double(r.c_max), io::format_double(r.max_imag)}) + "\n";
  return out;
}

inline std::string outcomes_csv(const std::vector<ModeRun>& runs) {
  std::string out = "mode,sigma_s,blew_up,blowup_time,steps,max_speed,max_imag,max_imag_ratio\n";
  for (const auto& r : runs) {
    double speed = 0.0, imag = 0.0;
    for (const auto& t : r.outcome.trace) {
      speed = std::max(speed, t.c_max);
      imag = std::max(imag, t.max_imag);
    }
    out += io::join({to_string(r.mode), io::format_double(r.sigma_s), r.outcome.blew_up ? "1" : "0",
                     io::format_double(r.outcome.blowup_time), std::to_string(r.outcome.steps),
                     io::format_double(speed), io::format_double(imag),
                     io::format_double(r.outcome.max_imag_ratio)}) +
           "\n";
  }
  return out;
}

inline nlohmann::json base_metadata(const ExperimentSpec& s) {
  nlohmann::json j;
  j["name"] = s.name;
  j["example"] = s.example;
  j["seed"] = s.seed;
  j["config"] = spec_to_json(s);
  nlohmann::json models = nlohmann::json::object();
  for (ClosureMode m : s.modes) {
    if (m == ClosureMode::pn) continue;
    const std::string& path = m == ClosureMode::hyperbolic_ml ? s.hyperbolic_model : s.unconstrained_model;
    models[to_string(m)] = {{"path", path}, {"git_blob_sha1", git_blob_sha1(io::read_file(path))}};
  }
  j["models"] = models;
  return j;
}

/// Kinetic reference plus every closure mode at one set of cross sections.
inline void run_comparison(const ExperimentSpec& s, const PeriodicGrid& grid, const CrossSections& xs,
                           const std::vector<double>& times, double sigma_label, ExperimentReport& rep,
                           std::vector<MomentField>* ref_out, std::ostream* log) {
  const auto ref = kinetic_reference(s, grid, xs, times);
  const MomentField u0 = initial_moments(s, grid);
  const double t_end = *std::max_element(times.begin(), times.end());
  for (ClosureMode mode : s.modes) {
    const Closure closure = load_closure(mode, s);
    SolverConfig cfg = SolverConfig::for_mode(mode, grid.nx);
    cfg.t_end = t_end;
    ModeRun run{mode, sigma_label, solve(u0, closure, xs, cfg, times)};
    if (log) {
      *log << s.name << ": " << to_string(mode) << " sigma_s=" << sigma_label << " steps=" << run.outcome.steps;
      if (run.outcome.blew_up) *log << " blew up at t=" << run.outcome.blowup_time;
      *log << "\n";
    }
    for (const auto& r : ref) rep.errors.push_back(compare(mode, sigma_label, r, run.outcome));
    rep.runs.push_back(std::move(run));
  }
  if (ref_out) *ref_out = ref;
}

inline ExperimentReport run_transport_example(const ExperimentSpec& s, std::ostream* log) {
  s.validate();
  ExperimentReport rep;
  rep.name = s.name;
  rep.metadata = base_metadata(s);
  const PeriodicGrid grid{s.nx};
  const CrossSections xs = build_cross_sections(s.cross_sections, grid);
  const double label = s.cross_sections.type == "constant" ? s.cross_sections.sigma_s : 0.0;
  run_comparison(s, grid, xs, s.snapshot_times, label, rep, &rep.reference, log);
  rep.files["profiles.csv"] = profiles_csv(rep.reference, rep.runs, label);
  for (const auto& r : rep.runs)
    if (r.sigma_s == label) rep.files["trace_" + to_string(r.mode) + ".csv"] = trace_csv(r.outcome);

  if (s.cross_sections.type == "constant") {
    for (double sigma : s.sigma_sweep) {
      CrossSectionSpec c = s.cross_sections;
      c.sigma_s = sigma;
      run_comparison(s, grid, build_cross_sections(c, grid), s.sweep_times, sigma, rep, nullptr, log);
    }
  } else {
    const SnappedInterfaces snapped = snap_interfaces(s.cross_sections, grid);
    rep.metadata["snapped_interfaces"] = {{"x1", snapped.x1}, {"x2", snapped.x2}};
    rep.metadata["thin_region"] = {snapped.x1, snapped.x2};
  }
  rep.files["errors.csv"] = errors_csv(rep.errors);
  rep.files["outcomes.csv"] = outcomes_csv(rep.runs);
  nlohmann::json outcomes = nlohmann::json::array();
  for (const auto& r : rep.runs)
    outcomes.push_back({{"mode", to_string(r.mode)},
                        {"sigma_s", r.sigma_s},
                        {"blew_up", r.outcome.blew_up},
                        {"blowup_time", r.outcome.blew_up ? nlohmann::json(r.outcome.blowup_time) : nlohmann::json()},
                        {"max_imag_ratio", r.outcome.max_imag_ratio}});
  rep.metadata["outcomes"] = outcomes;
  return rep;
}

}  // namespace detail

/// Example 1: constant cross sections, held-out Fourier data, optional sigma_s sweep.
inline ExperimentReport run_example_const(const ExperimentSpec& s, std::ostream* log = nullptr) {
  if (s.cross_sections.type != "constant") throw DomainError("run_example_const: needs constant cross sections");
  return detail::run_transport_example(s, log);
}

/// Example 2: Gaussian source.
inline ExperimentReport run_example_gaussian(const ExperimentSpec& s, std::ostream* log = nullptr) {
  if (s.initial.type != "gaussian") throw DomainError("run_example_gaussian: needs a gaussian initial condition");
  return detail::run_transport_example(s, log);
}

/// Example 3: piecewise-constant cross sections, interfaces snapped to cell boundaries.
inline ExperimentReport run_example_two_material(const ExperimentSpec& s, std::ostream* log = nullptr) {
  if (s.cross_sections.type != "two_material")
    throw DomainError("run_example_two_material: needs two-material cross sections");
  return detail::run_transport_example(s, log);
}

/// Example 4: epsilon sweep in diffusive scaling against the limit equation.
inline ExperimentReport run_example_diffusion(const ExperimentSpec& s, std::ostream* log = nullptr) {
  s.validate();
  if (s.eps_list.empty()) throw DomainError("run_example_diffusion: empty epsilon list");
  ExperimentReport rep;
  rep.name = s.name;
  rep.metadata = detail::base_metadata(s);
  const PeriodicGrid grid{s.nx};
  const CrossSections xs = build_cross_sections(s.cross_sections, grid);
  const double t_end = s.snapshot_times.empty() ? 0.1 : s.snapshot_times.back();
  std::string table = "mode,epsilon,error,m2_ratio,flux_deviation,blew_up\n";
  std::vector<std::string> head{"x", "limit_m0"};
  std::vector<const MomentField*> cols;
  for (ClosureMode mode : s.modes) {
    const Closure closure = load_closure(mode, s);
    auto study = diffusion_limit_study(closure, xs, s.eps_list, t_end, grid, SolverConfig::for_mode(mode, s.nx));
    for (const auto& r : study.rows) {
      if (log)
        *log << s.name << ": " << to_string(mode) << " eps=" << r.epsilon << " error=" << r.error << "\n";
      table += io::join({to_string(mode), io::format_double(r.epsilon), io::format_double(r.error),
                         io::format_double(r.m2_ratio), io::format_double(r.flux_deviation), r.blew_up ? "1" : "0"}) +
               "\n";
    }
    rep.diffusion.emplace(mode, std::move(study));
  }
  const DiffusionField* limit = nullptr;
  for (const auto& [mode, study] : rep.diffusion) {
    limit = &study.reference;
    for (std::size_t k = 0; k < study.rows.size(); ++k) {
      head.push_back(to_string(mode) + "_eps" + io::format_double(study.rows[k].epsilon) + "_m0");
      cols.push_back(&study.solutions[k]);
    }
  }
  std::string profiles = io::join(head) + "\n";
  for (int i = 0; i < grid.nx; ++i) {
    std::vector<std::string> row{io::format_double(grid.x(i)), io::format_double(limit->values[i])};
    for (const MomentField* c : cols) row.push_back(io::format_double(c->values(0, i)));
    profiles += io::join(row) + "\n";
  }
  rep.files["diffusion_limit.csv"] = table;
  rep.files["profiles.csv"] = profiles;
  return rep;
}

inline ExperimentReport run_example(const ExperimentSpec& s, std::ostream* log = nullptr) {
  if (s.example == "const") return run_example_const(s, log);
  if (s.example == "gaussian") return run_example_gaussian(s, log);
  if (s.example == "two_material") return run_example_two_material(s, log);
  if (s.example == "diffusion") return run_example_diffusion(s, log);
  throw DomainError("unknown example '" + s.example + "'");
}

/// Writes every report file plus metadata.json into dir.
inline void write_report(const ExperimentReport& rep, const std::string& dir) {
  std::filesystem::create_directories(dir);
  for (const auto& [name, content] : rep.files) io::write_file(dir + "/" + name, content);
  io::write_file(dir + "/metadata.json", rep.metadata.dump(2) + "\n");
}

}  // namespace mlclosure

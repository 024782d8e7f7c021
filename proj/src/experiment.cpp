#include "emm/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "emm/error.hpp"
#include "emm/expression.hpp"
#include "emm/report.hpp"

namespace emm {

namespace {

namespace fs = std::filesystem;

struct Check {
  std::string name;
  double value;
  double tolerance;
  bool pass;
  std::string detail;
};

void add(std::vector<Check> &checks, std::string name, double value,
         double tolerance, bool pass, std::string detail = {}) {
  checks.push_back({std::move(name), value, tolerance, pass, std::move(detail)});
}

std::ofstream open_output(const ExperimentConfig &cfg, const std::string &name) {
  fs::create_directories(cfg.output);
  std::ofstream out(fs::path(cfg.output) / name, std::ios::binary);
  if (!out)
    throw ValidationError("cannot write " + (fs::path(cfg.output) / name).string());
  return out;
}

void write_json(const ExperimentConfig &cfg, const std::string &name,
                const Json &j) {
  auto out = open_output(cfg, name);
  out << j.dump(2) << '\n';
}

Json checks_json(const std::vector<Check> &checks) {
  Json list = Json::array();
  for (const auto &c : checks)
    list.push_back({{"check", c.name},
                    {"value", c.value},
                    {"tolerance", c.tolerance},
                    {"pass", c.pass}});
  return list;
}

/// Logs every check, writes failure.json when any failed, returns exit code.
int finish(const std::string &command, const ExperimentConfig &cfg,
           const std::vector<Check> &checks, std::ostream &log) {
  std::vector<Failure> failures;
  for (const auto &c : checks) {
    log << (c.pass ? "  ok    " : "  FAIL  ") << c.name << " = "
        << format_double(c.value) << " (tolerance " << format_double(c.tolerance)
        << ")\n";
    if (!c.pass)
      failures.push_back({c.name, c.value, c.tolerance, c.detail});
  }
  const fs::path failure_file = fs::path(cfg.output) / "failure.json";
  if (failures.empty()) {
    std::error_code ec;
    fs::remove(failure_file, ec);
    return 0;
  }
  write_json(cfg, "failure.json", failure_json(command, failures));
  return 1;
}

int to_steps(double T, double dt) {
  const double r = T / dt;
  const double n = std::round(r);
  if (std::abs(r - n) > 1e-12 * std::max(1.0, r))
    throw ValidationError("dt = " + format_double(dt) + " does not divide T = " +
                          format_double(T));
  return static_cast<int>(n);
}

std::vector<int> snapshot_steps(const ExperimentConfig &cfg, int steps) {
  std::vector<int> out;
  for (double t : cfg.snapshots)
    out.push_back(std::clamp(static_cast<int>(std::lround(t / cfg.dt)), 0, steps));
  return out;
}

double observed_order(double coarse, double fine) {
  return std::log2(coarse / fine);
}

std::pair<DiscreteOperators, MaterialReport> setup(const ExperimentConfig &cfg) {
  const MaterialModel mat = experiment_material(cfg);
  const MaterialReport rep = validate_material(mat);
  return {assemble_operators(build_unit_square_mesh(cfg.m, cfg.dirichlet_side), mat),
          rep};
}

// --- validate ---------------------------------------------------------------

int run_validate(const ExperimentConfig &cfg, std::ostream &log) {
  const auto [ops, rep] = setup(cfg);
  log << "material: n = " << ops.num_branches()
      << ", alpha0 = " << format_double(rep.alpha0)
      << ", beta0 = " << format_double(rep.beta0)
      << ", gamma0 = " << format_double(rep.gamma0) << '\n';
  std::vector<Check> checks;

  double mass_x = 0.0, rho_integral = 0.0;
  for (int k = 0; k < ops.mass_rho.outerSize(); ++k)
    for (SpMat::InnerIterator it(ops.mass_rho, k); it; ++it)
      if (it.row() % 2 == 0 && it.col() % 2 == 0)
        mass_x += it.value();
  for (int e = 0; e < ops.num_elements(); ++e)
    rho_integral += ops.material.rho_at(e) * ops.element_areas(e);
  add(checks, "mass_row_sum", std::abs(mass_x - rho_integral), 1e-12,
      std::abs(mass_x - rho_integral) <= 1e-12 * std::max(1.0, rho_integral));

  Vec tx = Vec::Zero(ops.v_size()), lin = Vec::Zero(ops.v_size());
  for (int i = 0; i < ops.num_nodes(); ++i) {
    tx(2 * i) = 1.0;
    lin(2 * i) = ops.mesh.nodes(i, 0);
  }
  const double trans = apply_strain(ops, tx).cwiseAbs().maxCoeff();
  add(checks, "translation_strain", trans, 1e-12, trans <= 1e-12);
  Vec expect(3 * ops.num_elements());
  for (int e = 0; e < ops.num_elements(); ++e)
    expect.segment<3>(3 * e) << 1.0, 0.0, 0.0;
  const double linerr = (apply_strain(ops, lin) - expect).cwiseAbs().maxCoeff();
  add(checks, "linear_field_strain", linerr, 1e-12, linerr <= 1e-12);

  std::mt19937_64 rng(cfg.seed);
  std::normal_distribution<double> gauss;
  Vec w(ops.v_size()), tau(3 * ops.num_elements());
  for (auto &x : w) x = gauss(rng);
  for (auto &x : tau) x = gauss(rng);
  double lhs = 0.0;
  const Vec sw = apply_strain(ops, w);
  for (int e = 0; e < ops.num_elements(); ++e)
    lhs += ops.element_areas(e) * sw.segment<3>(3 * e).dot(tau.segment<3>(3 * e));
  const double rhs = w.dot(strain_adjoint(ops, tau));
  const double adj = std::abs(lhs - rhs) / std::max(1.0, std::abs(lhs));
  add(checks, "strain_adjoint", adj, 1e-12, adj <= 1e-12);

  const SpMat b1 = schur_matrix(ops, 1.0, 1), b0 = schur_matrix(ops, 1.0, 0);
  const SpMat bn = ops.restriction * ops.boundary_mass_N *
                   SpMat(ops.restriction.transpose());
  const double bdiff = Eigen::MatrixXd(b1 - b0 - bn).cwiseAbs().maxCoeff();
  add(checks, "schur_boundary_difference", bdiff, 1e-12, bdiff <= 1e-12);
  Eigen::SimplicialLLT<SpMat> llt(b1);
  add(checks, "schur_cholesky", llt.info() == Eigen::Success ? 0.0 : 1.0, 0.0,
      llt.info() == Eigen::Success);

  // Discrete Korn: (sum_j C_j e[v], e[v]) on the constrained space.
  KelvinMat3 csum = KelvinMat3::Zero();
  for (const auto &c : ops.stiffness)
    csum += c;
  std::vector<Eigen::Triplet<double>> wt;
  for (int e = 0; e < ops.num_elements(); ++e)
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        wt.emplace_back(3 * e + r, 3 * e + c, ops.element_areas(e) * csum(r, c));
  SpMat weighted(3 * ops.num_elements(), 3 * ops.num_elements());
  weighted.setFromTriplets(wt.begin(), wt.end());
  const SpMat k = ops.restriction *
                  SpMat(SpMat(ops.strain.transpose()) * weighted * ops.strain) *
                  SpMat(ops.restriction.transpose());
  double korn = 0.0;
  if (k.rows() <= 800) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(Eigen::MatrixXd(k),
                                                      Eigen::EigenvaluesOnly);
    korn = es.eigenvalues()(0);
  } else {
    Eigen::SimplicialLLT<SpMat> kl(k);
    korn = kl.info() == Eigen::Success ? 1.0 : 0.0;
  }
  add(checks, "korn_min_eigenvalue", korn, 0.0, korn > 0.0);

  Json j;
  j["alpha0"] = rep.alpha0;
  j["beta0"] = rep.beta0;
  j["gamma0"] = rep.gamma0;
  j["nodes"] = ops.num_nodes();
  j["elements"] = ops.num_elements();
  j["boundary_edges"] = ops.mesh.boundary_edges.size();
  j["checks"] = checks_json(checks);
  write_json(cfg, "validate.json", j);
  return finish("validate", cfg, checks, log);
}

// --- simulate / decay -------------------------------------------------------

void write_energy(const ExperimentConfig &cfg, const DiscreteOperators &ops,
                  const Trajectory &traj) {
  auto out = open_output(cfg, "energy.csv");
  if (traj.steps() >= 2)
    write_energy_csv(out, higher_energies(ops, traj, cfg.c_amend));
  else
    write_energy_log_csv(out, traj);
}

int run_simulate(const ExperimentConfig &cfg, std::ostream &log) {
  const auto [ops, rep] = setup(cfg);
  (void)rep;
  const RSState s0 = field_state(ops, cfg, "initial");
  EvolutionConfig ec;
  ec.dt = cfg.dt;
  ec.steps = cfg.steps();
  ec.alpha = cfg.alpha;
  const Trajectory traj = evolve(ops, s0, ec);
  write_energy(cfg, ops, traj);
  if (!cfg.snapshots.empty()) {
    auto out = open_output(cfg, "snapshots.csv");
    write_snapshot_csv(out, ops, traj, snapshot_steps(cfg, traj.steps()));
  }
  log << "simulate: " << traj.steps() << " steps, E(0) = "
      << format_double(traj.energy_log.front())
      << ", E(T) = " << format_double(traj.energy_log.back()) << '\n';

  std::vector<Check> checks;
  const double e0 = traj.energy_log.front();
  if (cfg.alpha == 1) {
    const DissipationReport d = dissipation_residual(ops, traj);
    add(checks, "dissipation_identity", d.max_abs, 1e-11 * e0,
        d.max_abs <= 1e-11 * e0);
  }
  if (cfg.alpha >= 0) {
    double rise = 0.0;
    for (int k = 0; k < traj.steps(); ++k)
      rise = std::max(rise, traj.energy_log[k + 1] - traj.energy_log[k]);
    add(checks, "energy_non_increasing", rise, 1e-12 * e0, rise <= 1e-12 * e0);
  }
  return finish("simulate", cfg, checks, log);
}

int run_decay(const ExperimentConfig &cfg, std::ostream &log) {
  const auto [ops, rep] = setup(cfg);
  (void)rep;
  if (cfg.steps() < 2)
    throw ValidationError("decay needs at least two steps");
  const RSState s0 = field_state(ops, cfg, "initial");
  EvolutionConfig ec;
  ec.dt = cfg.dt;
  ec.steps = cfg.steps();
  ec.alpha = 1;
  const Trajectory traj = evolve(ops, s0, ec);
  const EnergySeries es = higher_energies(ops, traj, cfg.c_amend);
  write_energy(cfg, ops, traj);
  const double lo = cfg.window.empty() ? 0.5 * cfg.T : cfg.window[0];
  const double hi = cfg.window.empty() ? cfg.T : cfg.window[1];

  std::vector<Check> checks;
  Json j;
  auto fit = [&](const std::string &name, const std::vector<double> &values) {
    try {
      const DecayReport r = fit_decay(es.t, values, lo, hi);
      j[name] = to_json(r);
      log << name << ": a4_hat = " << format_double(r.a4_hat)
          << ", r^2 = " << format_double(r.r_squared) << '\n';
      add(checks, name + "_a4_hat", r.a4_hat, 0.0, r.a4_hat > 0.0);
      add(checks, name + "_r_squared", r.r_squared, cfg.r2_min,
          r.r_squared >= cfg.r2_min);
    } catch (const ValidationError &e) {
      j[name] = {{"error", e.what()}};
      add(checks, name + "_fit", 0.0, 0.0, false, e.what());
    }
  };
  fit("E", es.E);
  fit("E_bar", es.E_bar);
  write_json(cfg, "decay.json", j);
  return finish("decay", cfg, checks, log);
}

// --- contraction --------------------------------------------------------------

int run_contraction(const ExperimentConfig &cfg, std::ostream &log) {
  const auto [ops, rep] = setup(cfg);
  (void)rep;
  if (cfg.horizons.empty())
    throw ValidationError("contraction: empty horizon list");
  auto csv = open_output(cfg, "contraction.csv");
  csv << "T,steps,rho_hat,one_step_max\n";
  Json j;
  j["sweep"] = Json::array();
  std::vector<double> rho;
  for (double T : cfg.horizons) {
    const int n = to_steps(T, cfg.dt);
    const ControlHorizon h(ops, cfg.dt, n);
    const ContractionEstimate est =
        estimate_contraction(h, cfg.probes, cfg.iterations, cfg.seed);
    rho.push_back(est.rho_hat);
    csv << format_double(T) << ',' << n << ',' << format_double(est.rho_hat)
        << ',' << format_double(est.one_step_max) << '\n';
    Json e = to_json(est);
    e["T"] = T;
    j["sweep"].push_back(e);
    log << "T = " << format_double(T) << ": rho_hat = " << format_double(est.rho_hat)
        << '\n';
  }
  const int max_steps = to_steps(cfg.horizons.back(), cfg.dt);
  const int t1 = find_contraction_horizon(ops, cfg.dt, max_steps, cfg.threshold,
                                          cfg.probes, cfg.iterations, cfg.seed);
  j["threshold"] = cfg.threshold;
  j["T1"] = t1 < 0 ? Json(nullptr) : Json(t1 * cfg.dt);

  std::vector<Check> checks;
  double worst = 0.0;
  for (std::size_t i = 1; i < rho.size(); ++i)
    worst = std::max(worst, rho[i] / rho[i - 1] - 1.0);
  add(checks, "rho_hat_non_increasing", worst, 0.05, worst <= 0.05);
  add(checks, "rho_hat_final_below_threshold", rho.back(), cfg.threshold,
      rho.back() < cfg.threshold);
  j["checks"] = checks_json(checks);
  write_json(cfg, "contraction.json", j);
  return finish("contraction", cfg, checks, log);
}

// --- control -------------------------------------------------------------------

int run_control(const ExperimentConfig &cfg, std::ostream &log) {
  const auto [ops, rep] = setup(cfg);
  (void)rep;
  const ControlHorizon h(ops, cfg.dt, cfg.steps());
  const ContractionEstimate est =
      estimate_contraction(h, cfg.probes, cfg.iterations, cfg.seed);
  if (!(est.rho_hat < 1.0))
    throw SolverError("contraction estimate rho_hat = " +
                      format_double(est.rho_hat) + " >= 1; increase T");
  const RSState f = field_state(ops, cfg, "f", 1);
  const RSState g = field_state(ops, cfg, "g", 2);
  const ControlResult r = synthesize_control(h, f, g, cfg.tol);
  const VerificationReport v = verify_control(h, r.xi, f, g, r.tilde);
  {
    auto out = open_output(cfg, "xi.csv");
    write_control_csv(out, ops, r.xi, cfg.dt);
  }
  Json j;
  j["terminal_error"] = r.terminal_error;
  j["initial_error"] = r.initial_error;
  j["series_terms"] = r.series_terms;
  j["rho_hat"] = est.rho_hat;
  j["verify_terminal_error"] = v.terminal_error;
  j["verify_trajectory_error"] = v.trajectory_error;
  j["verify_worst_index"] = v.worst_index;
  log << "control: " << r.series_terms << " series terms, rho_hat = "
      << format_double(est.rho_hat) << '\n';

  std::vector<Check> checks;
  add(checks, "terminal_error", r.terminal_error, 1e-9, r.terminal_error <= 1e-9);
  add(checks, "initial_error", r.initial_error, 10 * cfg.tol,
      r.initial_error <= 10 * cfg.tol);
  add(checks, "verify_trajectory_error", v.trajectory_error, 1e-10,
      v.trajectory_error <= 1e-10,
      "worst time index " + std::to_string(v.worst_index));
  add(checks, "verify_terminal_error", v.terminal_error, 1e-9,
      v.terminal_error <= 1e-9);
  j["checks"] = checks_json(checks);
  write_json(cfg, "verification.json", j);
  return finish("control", cfg, checks, log);
}

// --- bvs -------------------------------------------------------------------------

int run_bvs(const ExperimentConfig &cfg, std::ostream &log) {
  const auto [ops, rep] = setup(cfg);
  (void)rep;
  std::vector<Check> checks;
  Json j;

  // Backend equivalence under dt halving.
  const Vec u0 = field_vector(ops, cfg, "u0", "x", "y");
  const Vec v0 = field_vector(ops, cfg, "initial", "v_x", "v_y");
  std::vector<double> diffs;
  for (int l = 0; l < cfg.levels; ++l) {
    BVSConfig bc;
    bc.dt = cfg.dt / std::pow(2.0, l);
    bc.steps = cfg.steps() << l;
    bc.alpha = cfg.alpha;
    const BVSTrajectory a = solve_bvs_ad(ops, u0, v0, bc);
    const BVSTrajectory b = solve_bvs_direct(ops, u0, v0, bc);
    const double ref = rho_norm(ops, a.u.back());
    const double d = rho_norm(ops, a.u.back() - b.u.back());
    diffs.push_back(ref > 0.0 ? d / ref : d);
  }
  j["backend_differences"] = diffs;
  if (diffs.size() >= 2 && diffs.back() > 1e-13) {
    const double order = observed_order(diffs[diffs.size() - 2], diffs.back());
    j["backend_order"] = order;
    add(checks, "backend_order", order, 0.3, std::abs(order - 2.0) <= 0.3);
  }

  // Partial control of the velocity.
  const ControlHorizon h(ops, cfg.dt, cfg.steps());
  const Vec f1 = field_vector(ops, cfg, "f", "v_x", "v_y");
  const Vec g1 = field_vector(ops, cfg, "g", "v_x", "v_y");
  std::optional<Vec> u_con;
  if (cfg.doc.has("u_con", "x") || cfg.doc.has("u_con", "y"))
    u_con = field_vector(ops, cfg, "u_con", "x", "y");
  const PartialControlResult p = partial_control(h, f1, g1, u_con, cfg.tol);
  {
    auto out = open_output(cfg, "xi.csv");
    write_control_csv(out, ops, p.control.xi, cfg.dt);
  }
  {
    auto out = open_output(cfg, "bvs.csv");
    std::vector<int> steps = snapshot_steps(cfg, cfg.steps());
    if (steps.empty())
      steps = {0, cfg.steps()};
    write_bvs_csv(out, ops, p.verification, steps);
  }
  j["terminal_error"] = p.control.terminal_error;
  j["initial_error"] = p.control.initial_error;
  j["series_terms"] = p.control.series_terms;
  j["u0_lsq_residual"] = p.initial_displacement.residual;
  j["constructed_initial_velocity_error"] = p.constructed_initial_velocity_error;
  j["constructed_terminal_velocity_error"] = p.constructed_terminal_velocity_error;
  j["initial_velocity_error"] = p.initial_velocity_error;
  j["terminal_velocity_error"] = p.terminal_velocity_error;
  const double vtol = std::max(1e-8, 10 * cfg.tol);
  add(checks, "initial_velocity_error", p.initial_velocity_error, vtol,
      p.initial_velocity_error <= vtol);
  add(checks, "terminal_velocity_error", p.terminal_velocity_error, vtol,
      p.terminal_velocity_error <= vtol);
  if (p.has_u_con) {
    j["u_con_strain_error"] = p.u_con_strain_error;
    j["u_con_nodal_error"] = p.u_con_nodal_error;
    add(checks, "u_con_strain_error", p.u_con_strain_error, 1e-9,
        p.u_con_strain_error <= 1e-9);
    add(checks, "u_con_nodal_error", p.u_con_nodal_error, 1e-9,
        p.u_con_nodal_error <= 1e-9);
  }
  j["checks"] = checks_json(checks);
  write_json(cfg, "bvs.json", j);
  log << "bvs: backend differences";
  for (double d : diffs)
    log << ' ' << format_double(d);
  log << '\n';
  return finish("bvs", cfg, checks, log);
}

} // namespace

int ExperimentConfig::steps() const { return to_steps(T, dt); }

void ExperimentConfig::validate() const {
  if (m < 1)
    throw ValidationError("mesh.m must be >= 1");
  if (!(dt > 0.0) || !(T >= 0.0))
    throw ValidationError("time.dt must be > 0 and time.T >= 0");
  if (alpha < -1 || alpha > 1)
    throw ValidationError("time.alpha must be -1, 0 or 1");
  (void)steps();
  if (!(tol > 0.0))
    throw ValidationError("run.tol must be positive");
  if (probes < 1 || iterations < 1 || levels < 1)
    throw ValidationError("run.probes, run.iterations and run.levels must be >= 1");
  if (!window.empty() && (window.size() != 2 || window[0] > window[1]))
    throw ValidationError("run.window must be [t_lo, t_hi]");
  if (!material_file.empty() && !fs::exists(material_file))
    throw ValidationError("material file not found: " + material_file);
}

ExperimentConfig parse_experiment(const std::string &text,
                                  const fs::path &base_dir) {
  return experiment_from_doc(ConfigDoc::parse(text), base_dir);
}

ExperimentConfig experiment_from_doc(const ConfigDoc &doc,
                                     const fs::path &base_dir) {
  ExperimentConfig c;
  c.doc = doc;
  const ConfigDoc &d = c.doc;
  c.m = static_cast<int>(d.get_int_or("mesh", "m", c.m));
  if (d.has("mesh", "dirichlet_side"))
    c.dirichlet_side = parse_side(d.get_string("mesh", "dirichlet_side"));
  if (d.has("material", "file")) {
    fs::path p = d.get_string("material", "file");
    if (p.is_relative() && !base_dir.empty())
      p = base_dir / p;
    c.material_file = p.string();
  }
  c.dt = d.get_double_or("time", "dt", c.dt);
  c.T = d.get_double_or("time", "T", c.T);
  c.alpha = static_cast<int>(d.get_int_or("time", "alpha", c.alpha));
  const long seed = d.get_int_or("run", "seed", static_cast<long>(c.seed));
  if (seed < 0)
    throw ValidationError("run.seed must be non-negative");
  c.seed = static_cast<std::uint64_t>(seed);
  c.tol = d.get_double_or("run", "tol", c.tol);
  c.output = d.get_string_or("run", "output", c.output);
  c.probes = static_cast<int>(d.get_int_or("run", "probes", c.probes));
  c.iterations = static_cast<int>(d.get_int_or("run", "iterations", c.iterations));
  if (d.has("run", "horizons"))
    c.horizons = d.get_list("run", "horizons");
  c.threshold = d.get_double_or("run", "threshold", c.threshold);
  c.c_amend = d.get_double_or("run", "c_amend", c.c_amend);
  c.r2_min = d.get_double_or("run", "r2_min", c.r2_min);
  if (d.has("run", "window"))
    c.window = d.get_list("run", "window");
  if (d.has("run", "snapshots"))
    c.snapshots = d.get_list("run", "snapshots");
  c.levels = static_cast<int>(d.get_int_or("run", "levels", c.levels));
  c.validate();
  return c;
}

ExperimentConfig load_experiment(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw ParseError("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_experiment(ss.str(), fs::path(path).parent_path());
}

MaterialModel experiment_material(const ExperimentConfig &cfg) {
  return cfg.material_file.empty() ? default_material()
                                   : load_material(cfg.material_file);
}

namespace {

std::uint64_t section_salt(const std::string &section) {
  std::uint64_t h = 1469598103934665603ULL; // FNV-1a
  for (unsigned char ch : section)
    h = (h ^ ch) * 1099511628211ULL;
  return h;
}

std::optional<Expression> expression_at(const ConfigDoc &d,
                                        const std::string &section,
                                        const std::string &key) {
  if (!d.has(section, key))
    return std::nullopt;
  return Expression::parse(d.get_string(section, key));
}

} // namespace

Vec field_vector(const DiscreteOperators &ops, const ExperimentConfig &cfg,
                 const std::string &section, const std::string &kx,
                 const std::string &ky) {
  const auto ex = expression_at(cfg.doc, section, kx);
  const auto ey = expression_at(cfg.doc, section, ky);
  if (cfg.doc.has(section, "random") && cfg.doc.get_bool(section, "random")) {
    std::mt19937_64 rng(cfg.seed * 7919ULL + section_salt(section));
    return cfg.doc.get_double_or(section, "scale", 1.0) *
           random_smooth_field(ops, rng);
  }
  return interpolate_field(ops, [&](double x, double y) {
    return Eigen::Vector2d(ex ? (*ex)(x, y) : 0.0, ey ? (*ey)(x, y) : 0.0);
  });
}

RSState field_state(const DiscreteOperators &ops, const ExperimentConfig &cfg,
                    const std::string &section, std::uint64_t salt) {
  const ConfigDoc &d = cfg.doc;
  if (d.has(section, "random") && d.get_bool(section, "random")) {
    std::mt19937_64 rng(cfg.seed * 7919ULL + section_salt(section) + salt);
    RSState s = random_smooth_state(ops, rng);
    s *= d.get_double_or(section, "scale", 1.0);
    return s;
  }
  RSState s;
  s.v = field_vector(ops, cfg, section, "v_x", "v_y");
  const auto xx = expression_at(d, section, "psi_xx");
  const auto yy = expression_at(d, section, "psi_yy");
  const auto xy = expression_at(d, section, "psi_xy");
  s.psi = Vec::Zero(ops.psi_size());
  for (int e = 0; e < ops.num_elements(); ++e) {
    const Eigen::Vector2d c = ops.mesh.centroid(e);
    SymTensor<double> t;
    t(0, 0) = xx ? (*xx)(c.x(), c.y()) : 0.0;
    t(1, 1) = yy ? (*yy)(c.x(), c.y()) : 0.0;
    t(0, 1) = t(1, 0) = xy ? (*xy)(c.x(), c.y()) : 0.0;
    const KelvinVec3 k = kelvin_from_tensor(t);
    for (int j = 0; j < ops.num_branches(); ++j)
      s.psi_block(ops, e, j) = k;
  }
  return s;
}

namespace {

int dispatch(const std::string &command, const ExperimentConfig &cfg,
             std::ostream &log) {
  if (command == "validate")
    return run_validate(cfg, log);
  if (command == "simulate")
    return run_simulate(cfg, log);
  if (command == "decay")
    return run_decay(cfg, log);
  if (command == "contraction")
    return run_contraction(cfg, log);
  if (command == "control")
    return run_control(cfg, log);
  if (command == "bvs")
    return run_bvs(cfg, log);
  throw ValidationError("unknown command '" + command + "'");
}

} // namespace

int run_experiment(const std::string &command, const ExperimentConfig &cfg,
                   std::ostream &log) {
  try {
    return dispatch(command, cfg, log);
  } catch (const SolverError &e) {
    log << "  FAIL  solver: " << e.what() << '\n';
    write_json(cfg, "failure.json",
               failure_json(command, {{"solver", 0.0, 0.0, e.what()}}));
    return 1;
  }
}

} // namespace emm

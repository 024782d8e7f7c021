#ifndef EMM_EXPERIMENT_HPP
#define EMM_EXPERIMENT_HPP

// Experiment runner behind the command line tool. Each command reads an
// ExperimentConfig, writes CSV/JSON artifacts into the output directory and
// returns the process exit code (0 pass, 1 tolerance failure).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "emm/bvs.hpp"
#include "emm/config.hpp"
#include "emm/mesh.hpp"

namespace emm {

/// Config layout:
///
///   [mesh]      m, dirichlet_side
///   [material]  file (relative to the config file; default material if absent)
///   [time]      dt, T, alpha
///   [run]       seed, tol, output, probes, iterations, horizons, threshold,
///               c_amend, r2_min, window, snapshots, levels
///   [initial] [f] [g]   v_x, v_y, psi_xx, psi_yy, psi_xy (expressions in x, y)
///                       or random = true (scaled by `scale`)
///   [u0] [u_con]        x, y
struct ExperimentConfig {
  int m = 4;
  Side dirichlet_side = Side::Left;
  std::string material_file;
  double dt = 1e-2;
  double T = 1.0;
  int alpha = 1;

  std::uint64_t seed = 42;
  double tol = 1e-8;
  std::string output = "out";
  int probes = 8;
  int iterations = 20;
  std::vector<double> horizons{1.0, 2.0, 4.0, 8.0};
  double threshold = 0.9;
  double c_amend = 1e-2;
  double r2_min = 0.99;
  std::vector<double> window; // empty = [T/2, T]
  std::vector<double> snapshots;
  int levels = 3; // dt halvings for convergence studies

  ConfigDoc doc; // field sections

  int steps() const;
  void validate() const;
};

/// Throws ParseError / ValidationError on malformed input.
ExperimentConfig experiment_from_doc(const ConfigDoc &doc,
                                     const std::filesystem::path &base_dir = {});
ExperimentConfig parse_experiment(const std::string &text,
                                  const std::filesystem::path &base_dir = {});
ExperimentConfig load_experiment(const std::string &path);

MaterialModel experiment_material(const ExperimentConfig &cfg);

/// Reduced-system state from a field section; zero when the section is
/// absent. `salt` decorrelates random draws of different sections.
RSState field_state(const DiscreteOperators &ops, const ExperimentConfig &cfg,
                    const std::string &section, std::uint64_t salt = 0);
/// Nodal vector field from keys kx, ky of a section (zero when absent).
Vec field_vector(const DiscreteOperators &ops, const ExperimentConfig &cfg,
                 const std::string &section, const std::string &kx,
                 const std::string &ky);

/// Solver failures (e.g. a divergent Neumann series) are reported like
/// tolerance failures: failure.json plus exit code 1. Config problems throw.
int run_experiment(const std::string &command, const ExperimentConfig &cfg,
                   std::ostream &log);

} // namespace emm

#endif // EMM_EXPERIMENT_HPP

#ifndef EMM_CONTROL_HPP
#define EMM_CONTROL_HPP

// Boundary control of the reduced system by composing a forward damped solve
// U(T) with a reversed damped solve U~(T) and inverting I - U~(T) U(T) by a
// Neumann series.

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "emm/energy.hpp"
#include "emm/evolution.hpp"

namespace emm {

/// Uniform grid on [0, T] with the dissipative (alpha = +1) midpoint stepper
/// factorized once. The operators must outlive the horizon.
class ControlHorizon {
public:
  ControlHorizon(const DiscreteOperators &ops, double dt, int steps);

  const DiscreteOperators &operators() const { return *ops_; }
  const MidpointStepper &stepper() const { return stepper_; }
  double dt() const { return dt_; }
  int steps() const { return steps_; }
  double horizon() const { return dt_ * steps_; }

private:
  const DiscreteOperators *ops_;
  double dt_;
  int steps_;
  MidpointStepper stepper_;
};

/// sqrt(E(s)).
double energy_norm(const DiscreteOperators &ops, const RSState &s);

/// N(v, psi) = (-v, psi).
RSState negate_velocity(RSState s);

RSState apply_U(const ControlHorizon &h, const RSState &s);
/// N U(T) N.
RSState apply_Utilde(const ControlHorizon &h, const RSState &s);
/// U~(T) U(T).
RSState apply_F(const ControlHorizon &h, const RSState &s);

/// Random state with v zero on the Dirichlet part, scaled to unit E-norm.
RSState random_state(const DiscreteOperators &ops, std::mt19937_64 &rng);
/// Random combination of cos(p pi x) cos(q pi y), p, q < modes, interpolated
/// at nodes (v) and centroids (psi); unit E-norm.
RSState random_smooth_state(const DiscreteOperators &ops, std::mt19937_64 &rng,
                            int modes = 3);
/// Nodal field built the same way, zero on the Dirichlet part, unscaled.
Vec random_smooth_field(const DiscreteOperators &ops, std::mt19937_64 &rng,
                        int modes = 3);

struct ContractionEstimate {
  double rho_hat = 0.0;                // max over probes and both estimators
  double one_step_max = 0.0;           // max ||F w||_E over unit probes
  std::vector<double> root_sequence;   // max_w ||F^m w||_E^{1/m}, m = 1..
  std::vector<double> ratio_sequence;  // max_w ||F^m w|| / ||F^{m-1} w||
  int probes = 0;
  int iterations = 0;
  std::string method;
};

/// Power-type estimate of ||F(T)|| in the E-norm from random probes. Both
/// per-probe estimators are lower bounds of the operator norm; the result is
/// an estimate, not a certified bound.
ContractionEstimate estimate_contraction(const ControlHorizon &h, int probes,
                                         int iterations, std::uint64_t seed);

/// Smallest horizon (in steps, bisection between 1 and max_steps) with
/// rho_hat < threshold; returns -1 if max_steps does not reach it.
int find_contraction_horizon(const DiscreteOperators &ops, double dt,
                             int max_steps, double threshold, int probes,
                             int iterations, std::uint64_t seed);

/// Coordinates used by the dense oracles: [v on free dofs ; psi].
Eigen::VectorXd pack_state(const DiscreteOperators &ops, const RSState &s);
RSState unpack_state(const DiscreteOperators &ops, const Eigen::VectorXd &x);
/// Gram matrix of the H inner product in packed coordinates.
Eigen::MatrixXd h_gram(const DiscreteOperators &ops);

/// F(T) assembled column by column (brute force; tiny meshes only).
Eigen::MatrixXd dense_F(const ControlHorizon &h);
/// Operator norm of a packed-coordinate matrix in the H (equivalently E) norm.
double dense_energy_norm(const DiscreteOperators &ops, const Eigen::MatrixXd &a);

struct NeumannResult {
  RSState sum;
  int terms = 0;
  std::vector<double> term_norms; // E-norm of each added term
  double rhs_norm = 0.0;          // ||f - U~ g||_E
};

/// (I - F)^{-1}(f - U~(T) g) by the truncated Neumann series. Stops once the
/// E-norm of the current term is <= tol * ||f - U~ g||_E. Throws SolverError
/// when term norms fail to decrease over 5 consecutive iterations.
NeumannResult solve_initial_data(const ControlHorizon &h, const RSState &f,
                                 const RSState &g, double tol,
                                 int max_terms = 100000);

struct ControlResult {
  std::vector<Vec> xi;      // traction at t_{k+1/2}, nonzero only on Neumann nodes
  RSState initial_datum;    // (v0, psi0)
  int series_terms = 0;
  std::vector<double> term_norms;
  double terminal_error = 0.0; // ||tilde(T) - g||_E / ||g||_E
  double initial_error = 0.0;  // ||tilde(0) - f||_E / ||f||_E

  Trajectory forward;                     // damped solve from (v0, psi0)
  std::vector<RSState> hat;               // (v^, psi^)(t_k)
  std::vector<Vec> hat_midpoint_velocities;
  std::vector<RSState> tilde;             // forward - hat at t_k
};

ControlResult synthesize_control(const ControlHorizon &h, const RSState &f,
                                 const RSState &g, double tol);

struct VerificationReport {
  double terminal_error = 0.0;   // ||resolved(T) - g||_E / ||g||_E
  double initial_error = 0.0;    // ||resolved(0) - f||_E / ||f||_E
  double trajectory_error = 0.0; // max_k ||resolved_k - tilde_k||_E / max_k ||tilde_k||_E
  int worst_index = 0;
  double tolerance = 1e-10;
  bool pass = false;
  Trajectory resolved;
};

/// Re-solves the reduced system with free boundary (alpha = 0) and traction
/// xi from f, and compares against g and the constructed trajectory.
VerificationReport verify_control(const ControlHorizon &h,
                                  const std::vector<Vec> &xi, const RSState &f,
                                  const RSState &g,
                                  const std::vector<RSState> &constructed,
                                  double tol = 1e-10);

/// Relative E-norm distance, falling back to the absolute distance when the
/// reference is zero.
double relative_energy_error(const DiscreteOperators &ops, const RSState &a,
                             const RSState &reference);

} // namespace emm

#endif // EMM_CONTROL_HPP

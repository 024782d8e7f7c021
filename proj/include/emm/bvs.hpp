#ifndef EMM_BVS_HPP
#define EMM_BVS_HPP

// Relaxation-kernel (Boltzmann-type) form of the model: the viscous strains
// are eliminated under phi(0) = 0, leaving
//   rho u'' = div sigma[u],
//   sigma[u] = sum_j C_j { e[u] - int_0^t exp(-(t-s) A_j) A_j e[u](s) ds },
// with A_j = C_j / eta_j.

#include <optional>
#include <vector>

#include "emm/control.hpp"

namespace emm {

/// C_j exp(-t A_j).
KelvinMat3 relaxation_kernel(const DiscreteOperators &ops, int branch, double t);

/// Per-branch memory q_j(t) = int_0^t exp(-(t-s) A_j) A_j e(s) ds, advanced by
/// the exponential recursion that equals trapezoidal quadrature of the
/// convolution on a uniform grid. Memory is O(1) per element and branch.
class RelaxationMemory {
public:
  RelaxationMemory(const DiscreteOperators &ops, double dt);

  /// Starts a new history with strain e(0) (q = 0).
  void reset(const Vec &strain0);
  /// Appends e(t_{k+1}).
  void push(const Vec &strain_next);
  /// sigma at the latest sample.
  Vec stress() const;
  /// Stress if the next sample were `strain_next`, without committing it.
  Vec trial_stress(const Vec &strain_next) const;
  int samples() const { return samples_; }

  /// sum_j C_j (I - dt/2 A_j): derivative of the stress in the newest sample.
  const KelvinMat3 &instant_stiffness() const { return instant_; }

private:
  Vec next_memory(const Vec &strain_next) const;

  const DiscreteOperators *ops_;
  double dt_;
  std::vector<KelvinMat3> propagator_;      // exp(-dt A_j)
  std::vector<KelvinMat3> propagator_rate_; // exp(-dt A_j) A_j
  KelvinMat3 instant_;
  Vec memory_; // psi layout
  Vec strain_;
  int samples_ = 0;
};

/// Total stress at t_index from a stored strain history (3 * elements each).
Vec relaxation_stress(const DiscreteOperators &ops,
                      const std::vector<Vec> &history, double dt, int t_index);

/// sum_j C_j exp(-t A_j) e0 per element (constant strain from t = 0).
Vec constant_strain_stress(const DiscreteOperators &ops, const Vec &strain0,
                           double t);

struct BVSConfig {
  double dt = 1e-2;
  int steps = 1;
  int alpha = 0;               // traction = -alpha u' + g_N
  std::vector<Vec> traction;   // g_N at midpoints, empty or `steps`
  void validate() const;
};

struct BVSTrajectory {
  double dt = 0.0;
  std::vector<Vec> u; // t_k
  std::vector<Vec> v; // t_k
  std::vector<double> energy_log; // AD backend only: E of the reduced state
};

enum class BVSBackend { AD, Direct };

/// Reduced-system evolution from psi(0) = e[u0] in every branch, u by
/// trapezoidal quadrature of v.
BVSTrajectory solve_bvs_ad(const DiscreteOperators &ops, const Vec &u0,
                           const Vec &v0, const BVSConfig &cfg);

/// Midpoint rule in (u, v) for the displacement equation with the recursive
/// relaxation stress.
BVSTrajectory solve_bvs_direct(const DiscreteOperators &ops, const Vec &u0,
                               const Vec &v0, const BVSConfig &cfg);

BVSTrajectory solve_bvs(const DiscreteOperators &ops, const Vec &u0,
                        const Vec &v0, const BVSConfig &cfg, BVSBackend backend);

/// Constrained least squares for e[u] = psi_j in every branch: minimizes
/// sum_e |e| sum_j |e[u] - psi_j|^2 over u vanishing on the Dirichlet part.
struct DisplacementFit {
  Vec u;
  double residual = 0.0;          // sqrt of the minimized functional
  double relative_residual = 0.0; // residual / ||psi||
};
DisplacementFit fit_displacement(const DiscreteOperators &ops, const Vec &psi);

/// sqrt(sum_e |e| |e[u]|^2).
double strain_seminorm(const DiscreteOperators &ops, const Vec &u);
/// ||v||_rho.
double rho_norm(const DiscreteOperators &ops, const Vec &v);

struct PartialControlResult {
  ControlResult control;
  RSState f, g; // full targets handed to the synthesis
  DisplacementFit initial_displacement; // u~(0) from psi~(0)
  BVSTrajectory verification;           // direct backend re-solve

  // ||.||_rho relative errors of the velocity end conditions.
  double constructed_initial_velocity_error = 0.0;
  double constructed_terminal_velocity_error = 0.0;
  double initial_velocity_error = 0.0;  // verification run
  double terminal_velocity_error = 0.0; // verification run

  bool has_u_con = false;
  double u_con_strain_error = 0.0; // strain seminorm of u~(0) - u_con
  double u_con_nodal_error = 0.0;  // max nodal |u~(0) - u_con| after the pin
};

/// Steers u' from f1 to g1 with a boundary traction. f2 = e[u_con] in every
/// branch when u_con is given and zero otherwise; g2 = 0.
PartialControlResult partial_control(const ControlHorizon &h, const Vec &f1,
                                     const Vec &g1,
                                     const std::optional<Vec> &u_con,
                                     double tol);

} // namespace emm

#endif // EMM_BVS_HPP

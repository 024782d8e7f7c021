#ifndef EMM_EVOLUTION_HPP
#define EMM_EVOLUTION_HPP

#include <memory>
#include <vector>

#include <Eigen/SparseLU>

#include "emm/fem.hpp"

namespace emm {

/// Solves (lambda I - L_h)(v, psi) = (f, omega) with traction -alpha v + g_N
/// on the Neumann boundary. The psi unknowns are eliminated per element and
/// branch, leaving the Schur system for v on the free dofs; that matrix is
/// factorized once in the constructor.
///
/// Empty vectors stand for zero data. The operators must outlive the solver.
class ResolventSolver {
public:
  ResolventSolver(const DiscreteOperators &ops, double lambda, int alpha);

  RSState solve(const Vec &f, const Vec &omega, const Vec &g_N = Vec()) const;

  double lambda() const { return lambda_; }
  int alpha() const { return alpha_; }
  const DiscreteOperators &operators() const { return *ops_; }

private:
  const DiscreteOperators *ops_;
  double lambda_;
  int alpha_;
  std::vector<KelvinMat3> shifted_inverse_; // (lambda I + A_j)^{-1}
  std::shared_ptr<Eigen::SimplicialLDLT<SpMat>> ldlt_;
  std::shared_ptr<Eigen::SparseLU<SpMat>> lu_; // used when alpha = -1
};

/// Relative residual of both resolvent equations, in the weak form used by
/// the solver (v-equation tested against free basis functions).
double resolvent_residual(const DiscreteOperators &ops, double lambda,
                          int alpha, const RSState &x, const Vec &f,
                          const Vec &omega, const Vec &g_N = Vec());

/// One-shot resolvent solve; throws SolverError if the residual of the
/// returned pair exceeds 1e-10 (relative).
RSState resolvent_solve(const DiscreteOperators &ops, double lambda,
                        const Vec &f, const Vec &omega, int alpha,
                        const Vec &g_N = Vec());

/// Implicit midpoint (Crank-Nicolson) integrator: each step is a resolvent
/// solve with lambda = 2 / dt for the midpoint value, then
/// x^{k+1} = 2 x^{k+1/2} - x^k.
class MidpointStepper {
public:
  MidpointStepper(const DiscreteOperators &ops, double dt, int alpha);

  /// g_mid: traction sample at the midpoint (empty = none).
  /// source: volume forcing (f_v, f_psi) at the midpoint (nullptr = none).
  /// midpoint: receives x^{k+1/2} when non-null.
  RSState step(const RSState &state, const Vec &g_mid = Vec(),
               const RSState *source = nullptr,
               RSState *midpoint = nullptr) const;

  double dt() const { return dt_; }
  int alpha() const { return resolvent_.alpha(); }
  const DiscreteOperators &operators() const { return resolvent_.operators(); }

private:
  double dt_;
  ResolventSolver resolvent_;
};

RSState step_midpoint(const DiscreteOperators &ops, const RSState &state,
                      double dt, int alpha, const Vec &g_mid = Vec(),
                      const RSState *source = nullptr);

struct EvolutionConfig {
  double dt = 1e-2;
  int steps = 1;
  int alpha = 1;                      // traction = -alpha v + g_N
  std::vector<Vec> traction;          // g_N at t_{k+1/2}, empty or `steps`
  std::vector<RSState> volume_source; // testing hook, empty or `steps`

  double horizon() const { return dt * steps; }
  void validate() const;
};

struct Trajectory {
  double dt = 0.0;
  int alpha = 1;
  bool forced = false; // traction or volume source present
  std::vector<RSState> states;            // t_k, k = 0..N
  std::vector<Vec> midpoint_velocities;   // t_{k+1/2}, k = 0..N-1
  std::vector<double> energy_log;         // E at t_k

  int steps() const { return static_cast<int>(states.size()) - 1; }
  double time(int k) const { return dt * k; }
};

Trajectory evolve(const DiscreteOperators &ops, const RSState &state0,
                  const EvolutionConfig &cfg);
/// Same, reusing an existing stepper (its dt and alpha override cfg's).
Trajectory evolve(const MidpointStepper &stepper, const RSState &state0,
                  const EvolutionConfig &cfg);

/// Solves L_h (v^I, psi^I) = target for the dissipative generator (alpha=+1):
///   (|eta| e[v^I], e[w]) + (v^I, w)_N = (sum_j eta_j psi_j, e[w]) - (rho v, w)
///   psi^I_j = eta_j C_j^{-1} (e[v^I] - psi_j)
RSState l_preimage(const DiscreteOperators &ops, const RSState &target);

/// Weak-form residual of L_h x = target (relative).
double l_preimage_residual(const DiscreteOperators &ops, const RSState &x,
                           const RSState &target);

/// Running time integrals start + int_0^{t_k} x(s) ds by the trapezoidal rule.
std::vector<RSState> integrate_trajectory(const Trajectory &traj,
                                          const RSState &start);

/// Displacement / viscous-strain history of the augmented system.
struct ADTrajectory {
  double dt = 0.0;
  std::vector<Vec> u;   // nodal displacement at t_k
  std::vector<Vec> v;   // nodal velocity at t_k
  std::vector<Vec> phi; // branch tensors at t_k (psi layout)
};

/// u(t) = u0 + int v, phi_j = e[u] - psi_j. Rejects (u0, phi0) that are not
/// compatible with the trajectory's psi(0), naming the first bad element.
ADTrajectory reconstruct_ad(const DiscreteOperators &ops, const Vec &u0,
                            const Vec &phi0, const Trajectory &traj,
                            double tol = 1e-10);

/// max_k |eta_j d_t phi_j - C_j (e[u] - phi_j)| at interior grid times, with
/// the time derivative taken by central differences; normalized by the
/// largest branch stress magnitude.
double ad_residual(const DiscreteOperators &ops, const ADTrajectory &ad);

} // namespace emm

#endif // EMM_EVOLUTION_HPP

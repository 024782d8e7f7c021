#ifndef EMM_ENERGY_HPP
#define EMM_ENERGY_HPP

#include <utility>
#include <vector>

#include "emm/evolution.hpp"

namespace emm {

/// E(v, psi) = 1/2 ||v||_rho^2 + 1/2 sum_j (C_j psi_j, psi_j).
double energy(const DiscreteOperators &ops, const RSState &state);

/// Time series along a trajectory. Time derivatives use central differences
/// (one-sided second-order stencils at the two ends).
struct EnergySeries {
  std::vector<double> t;
  std::vector<double> E;
  std::vector<double> E_bar;   // E(x) + E(d_t x)
  std::vector<double> f_E;     // (sum_j C_j psi_j, e[v])
  std::vector<double> E_tilde; // E_bar + c_amend f_E
};

/// d/dt of the stored states by finite differences (same stencils as
/// higher_energies).
std::vector<RSState> time_derivative(const Trajectory &traj);

double coupling_term(const DiscreteOperators &ops, const RSState &state);

EnergySeries higher_energies(const DiscreteOperators &ops,
                             const Trajectory &traj, double c_amend = 1e-2);

struct DissipationReport {
  std::vector<double> residual; // per step, absolute
  double max_abs = 0.0;
  double initial_energy = 0.0;
};

/// Per step: (E^{k+1} - E^k)/dt + sum_j eta_j^{-1} ||C_j psi_j^{k+1/2}||^2
///           + ||v^{k+1/2}||_N^2, which vanishes identically for the midpoint
/// scheme. Rejects trajectories that are forced or not in mode alpha = +1.
DissipationReport dissipation_residual(const DiscreteOperators &ops,
                                       const Trajectory &traj);

/// Viscous dissipation rate at a midpoint in its two equivalent forms:
///   first  = sum_j eta_j^{-1} ||C_j psi_j||^2
///   second = sum_j eta_j ||e[v] - d_t psi_j||^2   (d_t psi from the step)
std::pair<double, double> viscous_rates(const DiscreteOperators &ops,
                                        const RSState &begin,
                                        const RSState &end, double dt);

struct DecayReport {
  double a4_hat = 0.0;
  double amplitude_hat = 0.0; // exp(intercept)
  double prefactor_hat = 0.0; // amplitude_hat / value at the first sample
  double r_squared = 0.0;
  double t_lo = 0.0;
  double t_hi = 0.0;
};

/// Least-squares line through (t, log value) restricted to [t_lo, t_hi];
/// a4_hat = -slope, amplitude_hat = exp(intercept) and
/// prefactor_hat = amplitude_hat / values[0] (the constant in
/// value(t) <= prefactor * value(0) * exp(-a4 t)).
DecayReport fit_decay(const std::vector<double> &t,
                      const std::vector<double> &values, double t_lo,
                      double t_hi);

} // namespace emm

#endif // EMM_ENERGY_HPP

#include "emm/energy.hpp"

#include <algorithm>
#include <cmath>

#include "emm/error.hpp"

namespace emm {

double energy(const DiscreteOperators &ops, const RSState &state) {
  return 0.5 * h_inner(ops, state, state);
}

double coupling_term(const DiscreteOperators &ops, const RSState &state) {
  const Vec sigma = total_stress(ops, state.psi);
  const Vec ev = apply_strain(ops, state.v);
  double s = 0.0;
  for (int e = 0; e < ops.num_elements(); ++e)
    s += ops.element_areas(e) * sigma.segment<3>(3 * e).dot(ev.segment<3>(3 * e));
  return s;
}

std::vector<RSState> time_derivative(const Trajectory &traj) {
  const int n = static_cast<int>(traj.states.size());
  if (n < 3)
    throw ValidationError("time derivatives need at least three states");
  const double h = traj.dt;
  const auto &x = traj.states;
  std::vector<RSState> d;
  d.reserve(n);
  d.push_back((1.0 / (2.0 * h)) * (-3.0 * x[0] + 4.0 * x[1] - x[2]));
  for (int k = 1; k + 1 < n; ++k)
    d.push_back((1.0 / (2.0 * h)) * (x[k + 1] - x[k - 1]));
  d.push_back((1.0 / (2.0 * h)) *
              (3.0 * x[n - 1] - 4.0 * x[n - 2] + x[n - 3]));
  return d;
}

EnergySeries higher_energies(const DiscreteOperators &ops,
                             const Trajectory &traj, double c_amend) {
  const std::vector<RSState> d = time_derivative(traj);
  EnergySeries s;
  for (int k = 0; k <= traj.steps(); ++k) {
    const double e = energy(ops, traj.states[k]);
    const double eb = e + energy(ops, d[k]);
    const double fe = coupling_term(ops, traj.states[k]);
    s.t.push_back(traj.time(k));
    s.E.push_back(e);
    s.E_bar.push_back(eb);
    s.f_E.push_back(fe);
    s.E_tilde.push_back(eb + c_amend * fe);
  }
  return s;
}

std::pair<double, double> viscous_rates(const DiscreteOperators &ops,
                                        const RSState &begin,
                                        const RSState &end, double dt) {
  const RSState mid = 0.5 * (begin + end);
  const Vec ev = apply_strain(ops, mid.v);
  double first = 0.0, second = 0.0;
  for (int e = 0; e < ops.num_elements(); ++e)
    for (int j = 0; j < ops.num_branches(); ++j) {
      const double a = ops.element_areas(e);
      const KelvinVec3 cpsi = ops.stiffness[j] * mid.psi_block(ops, e, j);
      first += a * cpsi.squaredNorm() / ops.viscosity[j];
      const KelvinVec3 dpsi =
          (end.psi_block(ops, e, j) - begin.psi_block(ops, e, j)) / dt;
      second += a * ops.viscosity[j] * (ev.segment<3>(3 * e) - dpsi).squaredNorm();
    }
  return {first, second};
}

DissipationReport dissipation_residual(const DiscreteOperators &ops,
                                       const Trajectory &traj) {
  if (traj.alpha != 1)
    throw ValidationError("dissipation identity holds only for the "
                          "dissipative boundary mode alpha = +1 (got " +
                          std::to_string(traj.alpha) + ")");
  if (traj.forced)
    throw ValidationError("dissipation identity requires a source-free "
                          "trajectory");
  DissipationReport rep;
  rep.initial_energy = energy(ops, traj.states.front());
  for (int k = 0; k < traj.steps(); ++k) {
    const RSState &a = traj.states[k];
    const RSState &b = traj.states[k + 1];
    const Vec vmid = 0.5 * (a.v + b.v);
    const double boundary = vmid.dot(ops.boundary_mass_N * vmid);
    const double viscous = viscous_rates(ops, a, b, traj.dt).first;
    const double r =
        (energy(ops, b) - energy(ops, a)) / traj.dt + viscous + boundary;
    rep.residual.push_back(r);
    rep.max_abs = std::max(rep.max_abs, std::abs(r));
  }
  return rep;
}

DecayReport fit_decay(const std::vector<double> &t,
                      const std::vector<double> &values, double t_lo,
                      double t_hi) {
  if (t.size() != values.size() || t.empty())
    throw ValidationError("fit_decay: time and value series differ in length");
  if (!(t_lo <= t_hi) || t_lo < t.front() - 1e-12 || t_hi > t.back() + 1e-12)
    throw ValidationError("fit_decay: window outside the series span");
  double n = 0, sx = 0, sy = 0, sxx = 0, sxy = 0, syy = 0;
  const double slack = 1e-9 * std::max(1.0, std::abs(t_hi));
  for (std::size_t k = 0; k < t.size(); ++k) {
    if (t[k] < t_lo - slack || t[k] > t_hi + slack)
      continue;
    if (!(values[k] > 0.0))
      throw ValidationError("fit_decay: non-positive value at t = " +
                            std::to_string(t[k]));
    const double y = std::log(values[k]);
    n += 1;
    sx += t[k];
    sy += y;
    sxx += t[k] * t[k];
    sxy += t[k] * y;
    syy += y * y;
  }
  if (n < 2)
    throw ValidationError("fit_decay: fewer than two samples in window");
  const double cxx = sxx - sx * sx / n;
  const double cxy = sxy - sx * sy / n;
  const double cyy = syy - sy * sy / n;
  if (!(cxx > 0.0))
    throw ValidationError("fit_decay: degenerate time window");
  const double slope = cxy / cxx;
  const double intercept = (sy - slope * sx) / n;

  DecayReport rep;
  rep.a4_hat = -slope;
  if (!(values.front() > 0.0))
    throw ValidationError("fit_decay: first value must be positive");
  rep.amplitude_hat = std::exp(intercept);
  rep.prefactor_hat = rep.amplitude_hat / values.front();
  rep.r_squared = cyy > 0.0 ? std::clamp(cxy * cxy / (cxx * cyy), 0.0, 1.0) : 1.0;
  rep.t_lo = t_lo;
  rep.t_hi = t_hi;
  return rep;
}

} // namespace emm

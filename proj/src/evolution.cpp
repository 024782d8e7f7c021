#include "emm/evolution.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "emm/error.hpp"

namespace emm {

namespace {

double safe_ratio(double num, double scale) {
  return scale > 0.0 ? num / scale : num;
}

// Area-weighted L2 norm of an element tensor field with `blocks` Kelvin
// triples per element.
double element_l2(const DiscreteOperators &ops, const Vec &field, int blocks) {
  double s = 0.0;
  for (int e = 0; e < ops.num_elements(); ++e)
    s += ops.element_areas(e) * field.segment(3 * blocks * e, 3 * blocks).squaredNorm();
  return std::sqrt(s);
}

} // namespace

ResolventSolver::ResolventSolver(const DiscreteOperators &ops, double lambda,
                                 int alpha)
    : ops_(&ops), lambda_(lambda), alpha_(alpha) {
  const SpMat k = schur_matrix(ops, lambda, alpha);
  for (int j = 0; j < ops.num_branches(); ++j)
    shifted_inverse_.push_back(
        (lambda * KelvinMat3::Identity() + ops.relaxation[j]).inverse());
  if (alpha >= 0) {
    ldlt_ = std::make_shared<Eigen::SimplicialLDLT<SpMat>>(k);
    if (ldlt_->info() != Eigen::Success)
      throw SolverError("Schur matrix factorization failed (lambda = " +
                        std::to_string(lambda) + ")");
  } else {
    // Anti-dissipative boundary: do not rely on definiteness.
    lu_ = std::make_shared<Eigen::SparseLU<SpMat>>();
    lu_->analyzePattern(k);
    lu_->factorize(k);
    if (lu_->info() != Eigen::Success)
      throw SolverError("Schur matrix is singular for alpha = -1, lambda = " +
                        std::to_string(lambda));
  }
}

RSState ResolventSolver::solve(const Vec &f, const Vec &omega,
                               const Vec &g_N) const {
  const DiscreteOperators &ops = *ops_;
  Vec load = Vec::Zero(ops.v_size());
  if (f.size())
    load += ops.mass_rho * f;
  if (g_N.size())
    load += ops.boundary_mass_N * g_N;
  if (omega.size()) {
    Vec tau = Vec::Zero(3 * ops.num_elements());
    for (int e = 0; e < ops.num_elements(); ++e)
      for (int j = 0; j < ops.num_branches(); ++j)
        tau.segment<3>(3 * e) += ops.stiffness[j] * shifted_inverse_[j] *
                                 omega.segment<3>(ops.psi_offset(e, j));
    load -= strain_adjoint(ops, tau);
  }
  const Vec rhs = restrict_free(ops, load);
  const Vec vfree = ldlt_ ? Vec(ldlt_->solve(rhs)) : Vec(lu_->solve(rhs));

  RSState x;
  x.v = prolong_free(ops, vfree);
  const Vec ev = apply_strain(ops, x.v);
  x.psi.resize(ops.psi_size());
  for (int e = 0; e < ops.num_elements(); ++e)
    for (int j = 0; j < ops.num_branches(); ++j) {
      KelvinVec3 r = ev.segment<3>(3 * e);
      if (omega.size())
        r += omega.segment<3>(ops.psi_offset(e, j));
      x.psi_block(ops, e, j) = shifted_inverse_[j] * r;
    }
  return x;
}

double resolvent_residual(const DiscreteOperators &ops, double lambda,
                          int alpha, const RSState &x, const Vec &f,
                          const Vec &omega, const Vec &g_N) {
  const Vec mv = ops.mass_rho * x.v;
  const Vec sl = stress_load(ops, x.psi);
  Vec rv = lambda * mv + sl;
  double scale_v = std::max(restrict_free(ops, lambda * mv).norm(),
                            restrict_free(ops, sl).norm());
  if (alpha != 0)
    rv += static_cast<double>(alpha) * (ops.boundary_mass_N * x.v);
  if (f.size()) {
    const Vec mf = ops.mass_rho * f;
    rv -= mf;
    scale_v = std::max(scale_v, restrict_free(ops, mf).norm());
  }
  if (g_N.size()) {
    const Vec mg = ops.boundary_mass_N * g_N;
    rv -= mg;
    scale_v = std::max(scale_v, restrict_free(ops, mg).norm());
  }
  const double res_v = safe_ratio(restrict_free(ops, rv).norm(), scale_v);

  const Vec ev = apply_strain(ops, x.v);
  Vec rpsi(ops.psi_size());
  for (int e = 0; e < ops.num_elements(); ++e)
    for (int j = 0; j < ops.num_branches(); ++j) {
      KelvinVec3 r = lambda * x.psi_block(ops, e, j) +
                     ops.relaxation[j] * x.psi_block(ops, e, j) -
                     ev.segment<3>(3 * e);
      if (omega.size())
        r -= omega.segment<3>(ops.psi_offset(e, j));
      rpsi.segment<3>(ops.psi_offset(e, j)) = r;
    }
  double scale_psi = std::max(lambda * x.psi.norm(), ev.norm());
  if (omega.size())
    scale_psi = std::max(scale_psi, omega.norm());
  const double res_psi = safe_ratio(rpsi.norm(), scale_psi);
  return std::max(res_v, res_psi);
}

RSState resolvent_solve(const DiscreteOperators &ops, double lambda,
                        const Vec &f, const Vec &omega, int alpha,
                        const Vec &g_N) {
  if (!(lambda > 0.0))
    throw ValidationError("resolvent_solve requires lambda > 0");
  const ResolventSolver solver(ops, lambda, alpha);
  RSState x = solver.solve(f, omega, g_N);
  const double res = resolvent_residual(ops, lambda, alpha, x, f, omega, g_N);
  if (!(res <= 1e-10)) {
    std::ostringstream msg;
    msg << "resolvent solve did not converge: relative residual " << res;
    throw SolverError(msg.str());
  }
  return x;
}

MidpointStepper::MidpointStepper(const DiscreteOperators &ops, double dt,
                                 int alpha)
    : dt_(dt), resolvent_(ops, 2.0 / dt, alpha) {
  if (!(dt > 0.0))
    throw ValidationError("time step dt must be positive");
}

RSState MidpointStepper::step(const RSState &state, const Vec &g_mid,
                              const RSState *source, RSState *midpoint) const {
  const double lambda = 2.0 / dt_;
  Vec f = lambda * state.v;
  Vec omega = lambda * state.psi;
  if (source) {
    if (source->v.size())
      f += source->v;
    if (source->psi.size())
      omega += source->psi;
  }
  RSState mid = resolvent_.solve(f, omega, g_mid);
  RSState next = 2.0 * mid - state;
  // Dirichlet rows are exactly zero in mid; keep them exactly zero in next.
  apply_dirichlet(resolvent_.operators(), next.v);
  if (midpoint)
    *midpoint = std::move(mid);
  return next;
}

RSState step_midpoint(const DiscreteOperators &ops, const RSState &state,
                      double dt, int alpha, const Vec &g_mid,
                      const RSState *source) {
  return MidpointStepper(ops, dt, alpha).step(state, g_mid, source);
}

void EvolutionConfig::validate() const {
  if (!(dt > 0.0))
    throw ValidationError("evolution: dt must be positive");
  if (steps < 0)
    throw ValidationError("evolution: steps must be non-negative");
  if (alpha < -1 || alpha > 1)
    throw ValidationError("evolution: alpha must be -1, 0 or +1");
  if (!traction.empty() && static_cast<int>(traction.size()) != steps)
    throw ValidationError("evolution: traction source needs exactly " +
                          std::to_string(steps) + " midpoint samples, got " +
                          std::to_string(traction.size()));
  if (!volume_source.empty() && static_cast<int>(volume_source.size()) != steps)
    throw ValidationError("evolution: volume source needs exactly " +
                          std::to_string(steps) + " midpoint samples");
}

Trajectory evolve(const DiscreteOperators &ops, const RSState &state0,
                  const EvolutionConfig &cfg) {
  cfg.validate();
  const MidpointStepper stepper(ops, cfg.dt, cfg.alpha);
  return evolve(stepper, state0, cfg);
}

Trajectory evolve(const MidpointStepper &stepper, const RSState &state0,
                  const EvolutionConfig &cfg) {
  EvolutionConfig checked = cfg;
  checked.dt = stepper.dt();
  checked.alpha = stepper.alpha();
  checked.validate();

  Trajectory traj;
  traj.dt = stepper.dt();
  traj.alpha = stepper.alpha();
  traj.forced = !cfg.traction.empty() || !cfg.volume_source.empty();
  traj.states.reserve(cfg.steps + 1);
  traj.midpoint_velocities.reserve(cfg.steps);
  traj.energy_log.reserve(cfg.steps + 1);

  const DiscreteOperators &ops = stepper.operators();
  auto energy_of = [&ops](const RSState &s) { return 0.5 * h_inner(ops, s, s); };
  RSState current = state0;
  traj.states.push_back(current);
  traj.energy_log.push_back(energy_of(current));
  RSState mid;
  for (int k = 0; k < cfg.steps; ++k) {
    const Vec g = cfg.traction.empty() ? Vec() : cfg.traction[k];
    const RSState *src =
        cfg.volume_source.empty() ? nullptr : &cfg.volume_source[k];
    current = stepper.step(current, g, src, &mid);
    traj.midpoint_velocities.push_back(mid.v);
    traj.states.push_back(current);
    traj.energy_log.push_back(energy_of(current));
  }
  return traj;
}

RSState l_preimage(const DiscreteOperators &ops, const RSState &target) {
  double eta_total = 0.0;
  for (double eta : ops.viscosity)
    eta_total += eta;
  const int ne = ops.num_elements();
  std::vector<Eigen::Triplet<double>> w;
  for (int e = 0; e < ne; ++e)
    for (int r = 0; r < 3; ++r)
      w.emplace_back(3 * e + r, 3 * e + r, ops.element_areas(e) * eta_total);
  SpMat weights(3 * ne, 3 * ne);
  weights.setFromTriplets(w.begin(), w.end());
  const SpMat st = ops.strain.transpose();
  const SpMat full = SpMat(st * weights * ops.strain) + ops.boundary_mass_N;
  const SpMat k = ops.restriction * full * SpMat(ops.restriction.transpose());

  Vec tau = Vec::Zero(3 * ne);
  for (int e = 0; e < ne; ++e)
    for (int j = 0; j < ops.num_branches(); ++j)
      tau.segment<3>(3 * e) +=
          ops.viscosity[j] * target.psi_block(ops, e, j);
  const Vec load = strain_adjoint(ops, tau) - ops.mass_rho * target.v;

  Eigen::SimplicialLDLT<SpMat> solver(k);
  if (solver.info() != Eigen::Success)
    throw SolverError("L-preimage system is not positive definite");
  RSState x;
  x.v = prolong_free(ops, solver.solve(restrict_free(ops, load)));
  const Vec ev = apply_strain(ops, x.v);
  x.psi.resize(ops.psi_size());
  for (int e = 0; e < ne; ++e)
    for (int j = 0; j < ops.num_branches(); ++j)
      x.psi_block(ops, e, j) =
          ops.viscosity[j] *
          ops.stiffness[j].ldlt().solve(KelvinVec3(
              ev.segment<3>(3 * e) - target.psi_block(ops, e, j)));
  return x;
}

double l_preimage_residual(const DiscreteOperators &ops, const RSState &x,
                           const RSState &target) {
  // v-line in weak form: -sum_j S^T W C_j psi_j - M_N v - M target.v = 0
  const Vec sl = stress_load(ops, x.psi);
  const Vec bn = ops.boundary_mass_N * x.v;
  const Vec mt = ops.mass_rho * target.v;
  const Vec rv = restrict_free(ops, Vec(-sl - bn - mt));
  const double scale_v = std::max({restrict_free(ops, sl).norm(),
                                   restrict_free(ops, bn).norm(),
                                   restrict_free(ops, mt).norm()});
  const Vec ev = apply_strain(ops, x.v);
  Vec rpsi(ops.psi_size());
  double scale_psi = 0.0;
  for (int e = 0; e < ops.num_elements(); ++e)
    for (int j = 0; j < ops.num_branches(); ++j) {
      const KelvinVec3 a = ops.relaxation[j] * x.psi_block(ops, e, j);
      rpsi.segment<3>(ops.psi_offset(e, j)) =
          -a + ev.segment<3>(3 * e) - target.psi_block(ops, e, j);
      scale_psi = std::max({scale_psi, a.norm(), ev.segment<3>(3 * e).norm()});
    }
  return std::max(safe_ratio(rv.norm(), scale_v),
                  safe_ratio(rpsi.norm(), scale_psi));
}

std::vector<RSState> integrate_trajectory(const Trajectory &traj,
                                          const RSState &start) {
  std::vector<RSState> out;
  out.reserve(traj.states.size());
  out.push_back(start);
  for (int k = 0; k < traj.steps(); ++k)
    out.push_back(out.back() +
                  (0.5 * traj.dt) * (traj.states[k] + traj.states[k + 1]));
  return out;
}

ADTrajectory reconstruct_ad(const DiscreteOperators &ops, const Vec &u0,
                            const Vec &phi0, const Trajectory &traj,
                            double tol) {
  if (traj.states.empty())
    throw ValidationError("reconstruct_ad: empty trajectory");
  const Vec eu0 = apply_strain(ops, u0);
  const RSState &s0 = traj.states.front();
  for (int e = 0; e < ops.num_elements(); ++e)
    for (int j = 0; j < ops.num_branches(); ++j) {
      const KelvinVec3 lhs = eu0.segment<3>(3 * e) -
                             phi0.segment<3>(ops.psi_offset(e, j));
      const KelvinVec3 rhs = s0.psi_block(ops, e, j);
      if ((lhs - rhs).norm() > tol * (1.0 + rhs.norm())) {
        std::ostringstream msg;
        msg << "reconstruct_ad: initial data incompatible at element " << e
            << ", branch " << j + 1 << " (|e[u0] - phi0 - psi(0)| = "
            << (lhs - rhs).norm() << ")";
        throw ValidationError(msg.str());
      }
    }

  ADTrajectory ad;
  ad.dt = traj.dt;
  Vec u = u0;
  for (int k = 0; k <= traj.steps(); ++k) {
    if (k > 0)
      u += 0.5 * traj.dt * (traj.states[k - 1].v + traj.states[k].v);
    const Vec eu = replicate_to_branches(ops, apply_strain(ops, u));
    ad.u.push_back(u);
    ad.v.push_back(traj.states[k].v);
    ad.phi.push_back(eu - traj.states[k].psi);
  }
  return ad;
}

double ad_residual(const DiscreteOperators &ops, const ADTrajectory &ad) {
  const int n = static_cast<int>(ad.u.size());
  if (n < 3)
    throw ValidationError("ad_residual needs at least three time levels");
  const int nb = ops.num_branches();
  double worst = 0.0;
  double stress_scale = 0.0;
  for (int k = 1; k + 1 < n; ++k) {
    const Vec eu = apply_strain(ops, ad.u[k]);
    Vec res(ops.psi_size()), sig(ops.psi_size());
    for (int e = 0; e < ops.num_elements(); ++e)
      for (int j = 0; j < nb; ++j) {
        const int o = ops.psi_offset(e, j);
        const KelvinVec3 dphi =
            (ad.phi[k + 1].segment<3>(o) - ad.phi[k - 1].segment<3>(o)) /
            (2.0 * ad.dt);
        const KelvinVec3 sigma =
            ops.stiffness[j] * (eu.segment<3>(3 * e) - ad.phi[k].segment<3>(o));
        sig.segment<3>(o) = sigma;
        res.segment<3>(o) = ops.viscosity[j] * dphi - sigma;
      }
    worst = std::max(worst, element_l2(ops, res, nb));
    stress_scale = std::max(stress_scale, element_l2(ops, sig, nb));
  }
  return safe_ratio(worst, stress_scale);
}

} // namespace emm

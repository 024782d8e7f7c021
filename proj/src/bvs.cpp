#include "emm/bvs.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/SparseCholesky>

#include "emm/error.hpp"

namespace emm {

KelvinMat3 relaxation_kernel(const DiscreteOperators &ops, int branch,
                             double t) {
  return ops.stiffness[branch] *
         branch_exponential(t, ops.viscosity[branch],
                            Stiffness<double>{ops.stiffness[branch]});
}

RelaxationMemory::RelaxationMemory(const DiscreteOperators &ops, double dt)
    : ops_(&ops), dt_(dt) {
  if (!(dt > 0.0))
    throw ValidationError("relaxation memory: dt must be positive");
  instant_.setZero();
  for (int j = 0; j < ops.num_branches(); ++j) {
    const KelvinMat3 e = branch_exponential(
        dt, ops.viscosity[j], Stiffness<double>{ops.stiffness[j]});
    propagator_.push_back(e);
    propagator_rate_.push_back(e * ops.relaxation[j]);
    instant_ += ops.stiffness[j] *
                (KelvinMat3::Identity() - 0.5 * dt * ops.relaxation[j]);
  }
}

void RelaxationMemory::reset(const Vec &strain0) {
  if (strain0.size() != 3 * ops_->num_elements())
    throw ValidationError("relaxation memory: strain has the wrong size");
  strain_ = strain0;
  memory_ = Vec::Zero(ops_->psi_size());
  samples_ = 1;
}

Vec RelaxationMemory::next_memory(const Vec &strain_next) const {
  const DiscreteOperators &ops = *ops_;
  Vec q(ops.psi_size());
  for (int e = 0; e < ops.num_elements(); ++e)
    for (int j = 0; j < ops.num_branches(); ++j) {
      const int o = ops.psi_offset(e, j);
      q.segment<3>(o) =
          propagator_[j] * memory_.segment<3>(o) +
          0.5 * dt_ *
              (propagator_rate_[j] * strain_.segment<3>(3 * e) +
               ops.relaxation[j] * strain_next.segment<3>(3 * e));
    }
  return q;
}

void RelaxationMemory::push(const Vec &strain_next) {
  if (samples_ == 0)
    throw ValidationError("relaxation memory: empty history");
  memory_ = next_memory(strain_next);
  strain_ = strain_next;
  ++samples_;
}

namespace {

Vec stress_from(const DiscreteOperators &ops, const Vec &strain,
                const Vec &memory) {
  Vec sigma = Vec::Zero(3 * ops.num_elements());
  for (int e = 0; e < ops.num_elements(); ++e)
    for (int j = 0; j < ops.num_branches(); ++j)
      sigma.segment<3>(3 * e) +=
          ops.stiffness[j] * (strain.segment<3>(3 * e) -
                              memory.segment<3>(ops.psi_offset(e, j)));
  return sigma;
}

} // namespace

Vec RelaxationMemory::stress() const {
  if (samples_ == 0)
    throw ValidationError("relaxation memory: empty history");
  return stress_from(*ops_, strain_, memory_);
}

Vec RelaxationMemory::trial_stress(const Vec &strain_next) const {
  if (samples_ == 0)
    throw ValidationError("relaxation memory: empty history");
  return stress_from(*ops_, strain_next, next_memory(strain_next));
}

Vec relaxation_stress(const DiscreteOperators &ops,
                      const std::vector<Vec> &history, double dt, int t_index) {
  if (history.empty())
    throw ValidationError("relaxation_stress: empty strain history");
  if (t_index < 0 || t_index >= static_cast<int>(history.size()))
    throw ValidationError("relaxation_stress: t_index outside the history");
  RelaxationMemory mem(ops, dt);
  mem.reset(history[0]);
  for (int k = 1; k <= t_index; ++k)
    mem.push(history[k]);
  return mem.stress();
}

Vec constant_strain_stress(const DiscreteOperators &ops, const Vec &strain0,
                           double t) {
  Vec sigma = Vec::Zero(3 * ops.num_elements());
  for (int j = 0; j < ops.num_branches(); ++j) {
    const KelvinMat3 g = relaxation_kernel(ops, j, t);
    for (int e = 0; e < ops.num_elements(); ++e)
      sigma.segment<3>(3 * e) += g * strain0.segment<3>(3 * e);
  }
  return sigma;
}

void BVSConfig::validate() const {
  if (!(dt > 0.0))
    throw ValidationError("BVS config: dt must be positive");
  if (steps < 0)
    throw ValidationError("BVS config: steps must be >= 0");
  if (alpha < -1 || alpha > 1)
    throw ValidationError("BVS config: alpha must be -1, 0 or +1");
  if (!traction.empty() && static_cast<int>(traction.size()) != steps)
    throw ValidationError("BVS config: traction needs one sample per step");
}

BVSTrajectory solve_bvs_ad(const DiscreteOperators &ops, const Vec &u0,
                           const Vec &v0, const BVSConfig &cfg) {
  cfg.validate();
  Vec u = u0, v = v0;
  apply_dirichlet(ops, u);
  apply_dirichlet(ops, v);
  RSState s0{v, replicate_to_branches(ops, apply_strain(ops, u))};
  EvolutionConfig ec;
  ec.dt = cfg.dt;
  ec.steps = cfg.steps;
  ec.alpha = cfg.alpha;
  ec.traction = cfg.traction;
  const Trajectory traj = evolve(ops, s0, ec);
  const ADTrajectory ad =
      reconstruct_ad(ops, u, Vec::Zero(ops.psi_size()), traj);
  BVSTrajectory out;
  out.dt = cfg.dt;
  out.u = ad.u;
  out.v = ad.v;
  out.energy_log = traj.energy_log;
  return out;
}

BVSTrajectory solve_bvs_direct(const DiscreteOperators &ops, const Vec &u0,
                               const Vec &v0, const BVSConfig &cfg) {
  cfg.validate();
  const double dt = cfg.dt;
  RelaxationMemory mem(ops, dt);

  // (2/dt) M + alpha M_N + (dt/2) S^T W K S on the free dofs.
  const int ne = ops.num_elements();
  std::vector<Eigen::Triplet<double>> w;
  w.reserve(9 * ne);
  for (int e = 0; e < ne; ++e)
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        w.emplace_back(3 * e + r, 3 * e + c,
                       ops.element_areas(e) * mem.instant_stiffness()(r, c));
  SpMat weighted(3 * ne, 3 * ne);
  weighted.setFromTriplets(w.begin(), w.end());
  const SpMat st = ops.strain.transpose();
  const SpMat full = (2.0 / dt) * ops.mass_rho +
                     static_cast<double>(cfg.alpha) * ops.boundary_mass_N +
                     (0.5 * dt) * SpMat(st * weighted * ops.strain);
  const SpMat a = ops.restriction * full * SpMat(ops.restriction.transpose());
  Eigen::SimplicialLDLT<SpMat> solver(a);
  if (solver.info() != Eigen::Success)
    throw SolverError("direct relaxation solver: factorization failed");

  BVSTrajectory out;
  out.dt = dt;
  Vec u = u0, v = v0;
  apply_dirichlet(ops, u);
  apply_dirichlet(ops, v);
  mem.reset(apply_strain(ops, u));
  out.u.push_back(u);
  out.v.push_back(v);
  const Vec zero_strain = Vec::Zero(3 * ne);
  for (int k = 0; k < cfg.steps; ++k) {
    const Vec history = mem.stress() + mem.trial_stress(zero_strain);
    Vec rhs = (2.0 / dt) * (ops.mass_rho * u) + 2.0 * (ops.mass_rho * v) -
              (0.5 * dt) * strain_adjoint(ops, history);
    if (cfg.alpha != 0)
      rhs += static_cast<double>(cfg.alpha) * (ops.boundary_mass_N * u);
    if (!cfg.traction.empty())
      rhs += dt * (ops.boundary_mass_N * cfg.traction[k]);
    const Vec un = prolong_free(ops, solver.solve(restrict_free(ops, rhs)));
    v = (2.0 / dt) * (un - u) - v;
    u = un;
    mem.push(apply_strain(ops, u));
    out.u.push_back(u);
    out.v.push_back(v);
  }
  return out;
}

BVSTrajectory solve_bvs(const DiscreteOperators &ops, const Vec &u0,
                        const Vec &v0, const BVSConfig &cfg,
                        BVSBackend backend) {
  return backend == BVSBackend::AD ? solve_bvs_ad(ops, u0, v0, cfg)
                                   : solve_bvs_direct(ops, u0, v0, cfg);
}

double strain_seminorm(const DiscreteOperators &ops, const Vec &u) {
  const Vec e = apply_strain(ops, u);
  double s = 0.0;
  for (int k = 0; k < ops.num_elements(); ++k)
    s += ops.element_areas(k) * e.segment<3>(3 * k).squaredNorm();
  return std::sqrt(s);
}

double rho_norm(const DiscreteOperators &ops, const Vec &v) {
  return std::sqrt(std::max(0.0, v.dot(ops.mass_rho * v)));
}

DisplacementFit fit_displacement(const DiscreteOperators &ops, const Vec &psi) {
  if (psi.size() != ops.psi_size())
    throw ValidationError("fit_displacement: psi has the wrong size");
  const int ne = ops.num_elements();
  const int n = ops.num_branches();
  Vec sum = Vec::Zero(3 * ne);
  for (int e = 0; e < ne; ++e)
    for (int j = 0; j < n; ++j)
      sum.segment<3>(3 * e) += psi.segment<3>(ops.psi_offset(e, j));

  std::vector<Eigen::Triplet<double>> w;
  for (int e = 0; e < ne; ++e)
    for (int r = 0; r < 3; ++r)
      w.emplace_back(3 * e + r, 3 * e + r, n * ops.element_areas(e));
  SpMat weighted(3 * ne, 3 * ne);
  weighted.setFromTriplets(w.begin(), w.end());
  const SpMat normal = ops.restriction *
                       SpMat(SpMat(ops.strain.transpose()) * weighted * ops.strain) *
                       SpMat(ops.restriction.transpose());
  Eigen::SimplicialLLT<SpMat> llt(normal);
  if (llt.info() != Eigen::Success)
    throw SolverError("fit_displacement: strain normal matrix is singular "
                      "(no Dirichlet part?)");
  DisplacementFit fit;
  fit.u = prolong_free(ops, llt.solve(restrict_free(ops, strain_adjoint(ops, sum))));

  const Vec eu = apply_strain(ops, fit.u);
  double res = 0.0, ref = 0.0;
  for (int e = 0; e < ne; ++e)
    for (int j = 0; j < n; ++j) {
      const auto p = psi.segment<3>(ops.psi_offset(e, j));
      res += ops.element_areas(e) * (eu.segment<3>(3 * e) - p).squaredNorm();
      ref += ops.element_areas(e) * p.squaredNorm();
    }
  fit.residual = std::sqrt(res);
  fit.relative_residual = ref > 0.0 ? fit.residual / std::sqrt(ref) : fit.residual;
  return fit;
}

PartialControlResult partial_control(const ControlHorizon &h, const Vec &f1,
                                     const Vec &g1,
                                     const std::optional<Vec> &u_con,
                                     double tol) {
  const DiscreteOperators &ops = h.operators();
  if (f1.size() != ops.v_size() || g1.size() != ops.v_size())
    throw ValidationError("partial_control: velocity targets have the wrong size");
  PartialControlResult out;
  out.f.v = f1;
  out.g.v = g1;
  apply_dirichlet(ops, out.f.v);
  apply_dirichlet(ops, out.g.v);
  out.g.psi = Vec::Zero(ops.psi_size());

  Vec pinned;
  if (u_con) {
    if (u_con->size() != ops.v_size())
      throw ValidationError("partial_control: u_con has the wrong size");
    pinned = *u_con;
    apply_dirichlet(ops, pinned);
    out.f.psi = replicate_to_branches(ops, apply_strain(ops, pinned));
    out.has_u_con = true;
  } else {
    out.f.psi = Vec::Zero(ops.psi_size());
  }

  out.control = synthesize_control(h, out.f, out.g, tol);
  out.initial_displacement = fit_displacement(ops, out.control.tilde.front().psi);

  auto rel = [&](const Vec &a, const Vec &ref) {
    const double r = rho_norm(ops, ref);
    const double d = rho_norm(ops, a - ref);
    return r > 0.0 ? d / r : d;
  };
  out.constructed_initial_velocity_error =
      rel(out.control.tilde.front().v, out.f.v);
  out.constructed_terminal_velocity_error =
      rel(out.control.tilde.back().v, out.g.v);

  BVSConfig cfg;
  cfg.dt = h.dt();
  cfg.steps = h.steps();
  cfg.alpha = 0;
  cfg.traction = out.control.xi;
  out.verification =
      solve_bvs_direct(ops, out.initial_displacement.u, out.f.v, cfg);
  out.initial_velocity_error = rel(out.verification.v.front(), out.f.v);
  out.terminal_velocity_error = rel(out.verification.v.back(), out.g.v);

  if (u_con) {
    const Vec diff = out.initial_displacement.u - pinned;
    out.u_con_strain_error = strain_seminorm(ops, diff);
    out.u_con_nodal_error = diff.cwiseAbs().maxCoeff();
  }
  return out;
}

} // namespace emm

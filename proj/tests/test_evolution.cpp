#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "support.hpp"

#include "emm/error.hpp"

using namespace emm;
using namespace emm::testing;

namespace {

RSState random_constrained(const DiscreteOperators &ops, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return random_state(ops, rng);
}

// Weak residual of the midpoint relations for one step, per equation.
std::pair<double, double> midpoint_relations(const DiscreteOperators &ops,
                                             const RSState &a, const RSState &b,
                                             const Vec &v_mid, double dt, int alpha) {
  const RSState mid = 0.5 * (a + b);
  Vec lhs = ops.mass_rho * (b.v - a.v) / dt;
  Vec rhs = -strain_adjoint(ops, total_stress(ops, mid.psi)) -
            alpha * (ops.boundary_mass_N * mid.v);
  const Vec rv = restrict_free(ops, lhs - rhs);
  const Vec sv = apply_strain(ops, v_mid);
  Vec rp = (b.psi - a.psi) / dt;
  for (int e = 0; e < ops.num_elements(); ++e)
    for (int j = 0; j < ops.num_branches(); ++j) {
      const int o = (e * ops.num_branches() + j) * 3;
      rp.segment<3>(o) -= -ops.relaxation[j] * mid.psi.segment<3>(o) + sv.segment<3>(3 * e);
    }
  return {rv.norm() / std::max(1e-300, restrict_free(ops, lhs).norm()),
          rp.norm() / std::max(1e-300, ((b.psi - a.psi) / dt).norm())};
}

} // namespace

TEST_CASE("zero data gives zero") {
  const auto ops = make_ops(2);
  const RSState z = RSState::zero(ops);
  const RSState r = resolvent_solve(ops, 1.0, Vec(), Vec(), 1);
  CHECK(r.v.norm() == 0.0);
  CHECK(r.psi.norm() == 0.0);
  const RSState s = step_midpoint(ops, z, 0.1, 1);
  CHECK(s.v.norm() + s.psi.norm() == 0.0);
  const Trajectory t = evolve(ops, z, {0.1, 5, 1, {}, {}});
  for (const auto &x : t.states)
    CHECK(x.v.norm() + x.psi.norm() == 0.0);
  CHECK(t.energy_log.back() == 0.0);
  CHECK_THROWS_AS(resolvent_solve(ops, 0.0, Vec(), Vec(), 1), ValidationError);
}

TEST_CASE("manufactured resolvent round trip") {
  const auto ops = make_ops(3);
  const RSState x = smooth_state(ops, 0.7);
  for (int alpha : {0, 1})
    for (double lam : {0.1, 1.0, 10.0, 200.0}) {
      const RSState lx = apply_generator(ops, alpha, x);
      const Vec f = lam * x.v - lx.v;
      const Vec omega = lam * x.psi - lx.psi;
      const RSState back = resolvent_solve(ops, lam, f, omega, alpha);
      CHECK(rel_state_diff(ops, back, x) <= 1e-10);
      CHECK(resolvent_residual(ops, lam, alpha, back, f, omega) <= 1e-10);
    }
}

TEST_CASE("resolvent matches a dense solve with boundary data") {
  const auto ops = make_ops(1);
  const DenseModel d = dense_model(ops);
  const RSState data = smooth_state(ops, 2.1);
  Vec g = Vec::Zero(ops.v_size());
  for (int i : ops.neumann_nodes)
    g.segment<2>(2 * i) << std::sin(i + 1.0), std::cos(2.0 * i);
  for (int alpha : {-1, 0, 1})
    for (double lam : {0.5, 3.0}) {
      const Eigen::MatrixXd a =
          lam * Eigen::MatrixXd::Identity(d.nf + d.np, d.nf + d.np) - dense_generator(d, alpha);
      const Eigen::VectorXd rhs = pack(d, data) + dense_trace_term(d, g);
      const Eigen::VectorXd want = a.fullPivLu().solve(rhs);
      // f enters as a nodal field tested against rho, i.e. (f, w)_rho.
      const RSState got = resolvent_solve(ops, lam, data.v, data.psi, alpha, g);
      CHECK(rel_diff(pack(d, got), want) <= 1e-10);
    }
}

TEST_CASE("one midpoint step satisfies the midpoint rule equation by equation") {
  const auto ops = make_ops(2, single_branch(1.0, 1.0, 0.5));
  const RSState x = smooth_state(ops);
  for (int alpha : {0, 1}) {
    const MidpointStepper st(ops, 0.05, alpha);
    RSState mid;
    const RSState y = st.step(x, Vec(), nullptr, &mid);
    CHECK(rel_diff(mid.v, 0.5 * (x.v + y.v)) <= 1e-14);
    const auto [rv, rp] = midpoint_relations(ops, x, y, mid.v, 0.05, alpha);
    CHECK(rv <= 1e-11);
    CHECK(rp <= 1e-12);
  }
}

TEST_CASE("element ODE: psi update is the midpoint rule of psi' = -A psi + e[v]") {
  // With the strain of the midpoint velocity as a known source, each element
  // and branch obeys a 3x3 linear ODE whose midpoint step has a closed form.
  const auto ops = make_ops(2);
  const RSState x = smooth_state(ops, 1.3);
  const double dt = 0.1;
  RSState mid;
  const RSState y = MidpointStepper(ops, dt, 1).step(x, Vec(), nullptr, &mid);
  const Vec sv = apply_strain(ops, mid.v);
  const Eigen::Matrix3d id = Eigen::Matrix3d::Identity();
  double worst = 0.0;
  for (int e = 0; e < ops.num_elements(); ++e)
    for (int j = 0; j < ops.num_branches(); ++j) {
      const Eigen::Matrix3d a = ops.relaxation[j];
      const Eigen::Vector3d p0 = x.psi_block(ops, e, j);
      const Eigen::Vector3d want =
          (id + 0.5 * dt * a).inverse() *
          ((id - 0.5 * dt * a) * p0 + dt * sv.segment<3>(3 * e));
      worst = std::max(worst, (Eigen::Vector3d(y.psi_block(ops, e, j)) - want).norm() /
                                  std::max(1.0, want.norm()));
    }
  CHECK(worst <= 1e-12);
}

TEST_CASE("Richardson: one step vs two half steps differ at third order") {
  const auto ops = make_ops(2);
  const RSState x = smooth_state(ops, 0.5);
  std::vector<double> diff;
  for (double dt : {0.04, 0.02, 0.01}) {
    const RSState one = step_midpoint(ops, x, dt, 1);
    const RSState two = step_midpoint(ops, step_midpoint(ops, x, dt / 2, 1), dt / 2, 1);
    diff.push_back(h_norm(ops, one - two));
  }
  const double r1 = diff[0] / diff[1], r2 = diff[1] / diff[2];
  MESSAGE("Richardson ratios " << r1 << ", " << r2);
  CHECK(r2 == doctest::Approx(8.0).epsilon(0.25));
}

TEST_CASE("energy is non-increasing and boundary damping only helps") {
  const auto ops = make_ops(3);
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 3; ++trial) {
    const RSState x = random_smooth_state(ops, rng);
    const Trajectory damped = evolve(ops, x, {0.02, 100, 1, {}, {}});
    const Trajectory free = evolve(ops, x, {0.02, 100, 0, {}, {}});
    for (int k = 0; k < 100; ++k) {
      CHECK(damped.energy_log[k + 1] <= damped.energy_log[k] * (1 + 1e-14));
      CHECK(free.energy_log[k + 1] <= free.energy_log[k] * (1 + 1e-14));
    }
    for (int k = 0; k <= 100; ++k)
      CHECK(damped.energy_log[k] <= free.energy_log[k] * (1 + 1e-13));
    CHECK(damped.energy_log.back() < free.energy_log.back());
  }
}

TEST_CASE("evolution config validation") {
  const auto ops = make_ops(1);
  const RSState z = RSState::zero(ops);
  CHECK_THROWS_AS(evolve(ops, z, {-0.1, 1, 1, {}, {}}), ValidationError);
  CHECK_THROWS_AS(evolve(ops, z, {0.1, 1, 2, {}, {}}), ValidationError);
  EvolutionConfig bad{0.1, 3, 1, {Vec::Zero(ops.v_size())}, {}};
  CHECK_THROWS_AS(evolve(ops, z, bad), ValidationError);
}

TEST_CASE("dissipativity of the generator") {
  for (int m : {2, 4}) {
    const auto ops = make_ops(m);
    for (int trial = 0; trial < 20; ++trial) {
      const RSState x = random_constrained(ops, 100 + trial);
      for (double lam : {0.1, 1.0, 10.0}) {
        const double lhs = h_norm(ops, lam * x - apply_generator(ops, 1, x));
        const double rhs = lam * h_norm(ops, x);
        CHECK((lhs - rhs) / rhs >= -1e-10);
      }
    }
  }
}

TEST_CASE("L-preimage") {
  const auto ops = make_ops(3);
  SUBCASE("zero target") {
    const RSState r = l_preimage(ops, RSState::zero(ops));
    CHECK(r.v.norm() + r.psi.norm() == 0.0);
  }
  SUBCASE("round trip through the generator") {
    for (int trial = 0; trial < 5; ++trial) {
      const RSState x = random_constrained(ops, 500 + trial);
      const RSState target = apply_generator(ops, 1, x);
      const RSState back = l_preimage(ops, target);
      CHECK(rel_state_diff(ops, back, x) <= 1e-9);
      CHECK(l_preimage_residual(ops, back, target) <= 1e-10);
    }
  }
  SUBCASE("integrated trajectory solves the damped system") {
    std::mt19937_64 rng(9);
    const RSState x0 = random_smooth_state(ops, rng);
    const Trajectory traj = evolve(ops, x0, {0.05, 40, 1, {}, {}});
    const RSState xi0 = l_preimage(ops, x0);
    const auto integ = integrate_trajectory(traj, xi0);
    double worst = 0.0;
    for (std::size_t k = 0; k < integ.size(); k += 5)
      worst = std::max(worst, l_preimage_residual(ops, integ[k], traj.states[k]));
    MESSAGE("integrated preimage residual " << worst);
    CHECK(worst <= 0.05 * 0.05);
  }
}

TEST_CASE("AD reconstruction") {
  const auto ops = make_ops(2);
  SUBCASE("zero trajectory") {
    const Trajectory t = evolve(ops, RSState::zero(ops), {0.1, 4, 1, {}, {}});
    const ADTrajectory ad = reconstruct_ad(ops, Vec::Zero(ops.v_size()),
                                           Vec::Zero(t.states[0].psi.size()), t);
    for (std::size_t k = 0; k < ad.u.size(); ++k)
      CHECK(ad.u[k].norm() + ad.phi[k].norm() + ad.v[k].norm() == 0.0);
  }
  SUBCASE("phi(0) = 0 when psi(0) is the strain of u0") {
    const Vec u0 = interpolate_field(ops, [](double x, double y) {
      return Eigen::Vector2d(x * y, x * x);
    });
    RSState x = RSState::zero(ops);
    x.psi = replicate_to_branches(ops, apply_strain(ops, u0));
    const Trajectory t = evolve(ops, x, {0.1, 4, 1, {}, {}});
    const ADTrajectory ad = reconstruct_ad(ops, u0, Vec::Zero(x.psi.size()), t);
    CHECK(ad.phi[0].norm() == 0.0);
    CHECK((ad.u[0] - u0).norm() == 0.0);
  }
  SUBCASE("incompatible initial data is rejected") {
    const RSState x = smooth_state(ops);
    const Trajectory t = evolve(ops, x, {0.1, 2, 1, {}, {}});
    try {
      reconstruct_ad(ops, Vec::Zero(ops.v_size()), Vec::Zero(x.psi.size()), t);
      FAIL("expected rejection");
    } catch (const ValidationError &e) {
      CHECK(std::string(e.what()).find("element") != std::string::npos);
    }
  }
  SUBCASE("AD residual shrinks at second order") {
    const RSState x = smooth_state(ops, 0.9);
    const Vec u0 = Vec::Zero(ops.v_size());
    std::vector<double> res;
    for (int level = 0; level < 3; ++level) {
      const int steps = 160 << level;
      const Trajectory t = evolve(ops, x, {1.0 / steps, steps, 1, {}, {}});
      const Vec phi0 = replicate_to_branches(ops, apply_strain(ops, u0)) - x.psi;
      res.push_back(ad_residual(ops, reconstruct_ad(ops, u0, phi0, t)));
    }
    const double p1 = std::log2(res[0] / res[1]), p2 = std::log2(res[1] / res[2]);
    MESSAGE("AD residual orders " << p1 << ", " << p2);
    CHECK(p2 == doctest::Approx(2.0).epsilon(0.15));
  }
}

// The velocity half of the reversal identity holds exactly in the continuum;
// the viscous half does not, because relaxation is not time-reversible. The
// reversed trajectory picks up psi' = +A psi + e[v] where the backward
// problem needs psi' = -A psi + e[v], so the psi residual is 2 A psi.
namespace {

// Worst relative residuals (v part, psi part less 2 A psi) of the reversed
// trajectory substituted into the alpha = -1 equations.
std::pair<double, double> reversal_residuals(const DiscreteOperators &ops, double dt) {
  const int n = static_cast<int>(0.5 / dt + 0.5);
  const RSState x0 = smooth_state(ops, 0.4);
  const Trajectory fwd = evolve(ops, x0, {dt, n, 1, {}, {}});
  const Trajectory back = evolve(ops, negate_velocity(fwd.states.back()), {dt, n, 1, {}, {}});
  // z(s) = N x2(T - s), a candidate solution of the alpha = -1 problem.
  std::vector<RSState> z;
  for (int k = 0; k <= n; ++k)
    z.push_back(negate_velocity(back.states[n - k]));
  double worst_v = 0.0, worst_psi = 0.0;
  for (int k = 1; k < n; ++k) {
    const RSState dz = (1.0 / (2 * dt)) * (z[k + 1] - z[k - 1]);
    const RSState gen = apply_generator(ops, -1, z[k]);
    const double scale = h_norm(ops, gen);
    const Vec rv = dz.v - gen.v;
    worst_v = std::max(worst_v, std::sqrt(rv.dot(ops.mass_rho * rv)) / scale);
    Vec gap = dz.psi - gen.psi;
    for (int e = 0; e < ops.num_elements(); ++e)
      for (int j = 0; j < ops.num_branches(); ++j)
        gap.segment<3>((e * ops.num_branches() + j) * 3) -=
            2.0 * ops.relaxation[j] * z[k].psi_block(ops, e, j);
    worst_psi = std::max(worst_psi, gap.norm() / dz.psi.norm());
  }
  return {worst_v, worst_psi};
}

} // namespace

TEST_CASE("time reversal: velocity equation of the backward problem") {
  const auto ops = make_ops(2);
  const auto [v1, p1] = reversal_residuals(ops, 0.01);
  const auto [v2, p2] = reversal_residuals(ops, 0.005);
  MESSAGE("reversal residuals v: " << v1 << " -> " << v2 << ", psi less 2A psi: " << p1
                                   << " -> " << p2);
  CHECK(v1 / v2 == doctest::Approx(4.0).epsilon(0.2));
  CHECK(p1 / p2 == doctest::Approx(4.0).epsilon(0.2));
  CHECK(v2 <= 5e-3);
}

TEST_CASE("time reversal: full backward-problem residual is O(dt^2)" * doctest::may_fail()) {
  // Faithful statement of the reversal invariant. Expected to fail on the
  // psi equation; see the previous test for the measured structure.
  const auto ops = make_ops(2);
  const double dt = 0.02;
  const int n = 25;
  const RSState x0 = smooth_state(ops, 0.4);
  const Trajectory fwd = evolve(ops, x0, {dt, n, 1, {}, {}});
  const Trajectory back = evolve(ops, negate_velocity(fwd.states.back()), {dt, n, 1, {}, {}});
  double worst = 0.0;
  for (int k = 1; k < n; ++k) {
    const RSState zm = negate_velocity(back.states[n - k + 1]);
    const RSState z0 = negate_velocity(back.states[n - k]);
    const RSState zp = negate_velocity(back.states[n - k - 1]);
    const RSState r = (1.0 / (2 * dt)) * (zp - zm) - apply_generator(ops, -1, z0);
    worst = std::max(worst, h_norm(ops, r) / h_norm(ops, apply_generator(ops, -1, z0)));
  }
  MESSAGE("full reversal residual " << worst);
  CHECK(worst <= 10 * dt * dt);
}

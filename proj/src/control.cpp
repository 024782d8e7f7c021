#include "emm/control.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "emm/error.hpp"

namespace emm {

ControlHorizon::ControlHorizon(const DiscreteOperators &ops, double dt,
                               int steps)
    : ops_(&ops), dt_(dt), steps_(steps), stepper_(ops, dt, 1) {
  if (steps < 0)
    throw ValidationError("control horizon: steps must be >= 0");
}

double energy_norm(const DiscreteOperators &ops, const RSState &s) {
  return std::sqrt(std::max(0.0, energy(ops, s)));
}

RSState negate_velocity(RSState s) {
  s.v = -s.v;
  return s;
}

RSState apply_U(const ControlHorizon &h, const RSState &s) {
  RSState x = s;
  for (int k = 0; k < h.steps(); ++k)
    x = h.stepper().step(x);
  return x;
}

RSState apply_Utilde(const ControlHorizon &h, const RSState &s) {
  return negate_velocity(apply_U(h, negate_velocity(s)));
}

RSState apply_F(const ControlHorizon &h, const RSState &s) {
  return apply_Utilde(h, apply_U(h, s));
}

RSState random_state(const DiscreteOperators &ops, std::mt19937_64 &rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  RSState s = RSState::zero(ops);
  for (int i = 0; i < s.v.size(); ++i)
    s.v(i) = gauss(rng);
  for (int i = 0; i < s.psi.size(); ++i)
    s.psi(i) = gauss(rng);
  apply_dirichlet(ops, s.v);
  const double n = energy_norm(ops, s);
  if (n > 0.0)
    s *= 1.0 / n;
  return s;
}

namespace {

// Scalar field sum_{p,q} c_pq cos(p pi x) cos(q pi y) with normal c_pq.
std::function<double(double, double)> random_cosine_series(std::mt19937_64 &rng,
                                                          int modes) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Eigen::MatrixXd c(modes, modes);
  for (int p = 0; p < modes; ++p)
    for (int q = 0; q < modes; ++q)
      c(p, q) = gauss(rng) / (1.0 + p + q);
  return [c, modes](double x, double y) {
    double s = 0.0;
    for (int p = 0; p < modes; ++p)
      for (int q = 0; q < modes; ++q)
        s += c(p, q) * std::cos(p * std::numbers::pi * x) *
             std::cos(q * std::numbers::pi * y);
    return s;
  };
}

} // namespace

Vec random_smooth_field(const DiscreteOperators &ops, std::mt19937_64 &rng,
                        int modes) {
  if (modes < 1)
    throw ValidationError("random_smooth_field: modes must be positive");
  const auto fx = random_cosine_series(rng, modes);
  const auto fy = random_cosine_series(rng, modes);
  return interpolate_field(ops, [&](double x, double y) {
    return Eigen::Vector2d(fx(x, y), fy(x, y));
  });
}

RSState random_smooth_state(const DiscreteOperators &ops, std::mt19937_64 &rng,
                            int modes) {
  RSState s;
  s.v = random_smooth_field(ops, rng, modes);
  s.psi.resize(ops.psi_size());
  for (int j = 0; j < ops.num_branches(); ++j)
    for (int k = 0; k < 3; ++k) {
      const auto f = random_cosine_series(rng, modes);
      for (int e = 0; e < ops.num_elements(); ++e) {
        const Eigen::Vector2d c = ops.mesh.centroid(e);
        s.psi(ops.psi_offset(e, j) + k) = f(c.x(), c.y());
      }
    }
  const double n = energy_norm(ops, s);
  if (n > 0.0)
    s *= 1.0 / n;
  return s;
}

ContractionEstimate estimate_contraction(const ControlHorizon &h, int probes,
                                         int iterations, std::uint64_t seed) {
  if (probes < 1 || iterations < 1)
    throw ValidationError("estimate_contraction: probes and iterations must "
                          "be positive");
  const DiscreteOperators &ops = h.operators();
  std::mt19937_64 rng(seed);
  ContractionEstimate est;
  est.probes = probes;
  est.iterations = iterations;
  est.method = "power: max(||F^m w||^(1/m), ||F^m w|| / ||F^(m-1) w||)";
  est.root_sequence.assign(iterations, 0.0);
  est.ratio_sequence.assign(iterations, 0.0);

  for (int p = 0; p < probes; ++p) {
    RSState x = random_state(ops, rng);
    // x is kept normalized; log_norm accumulates log ||F^m w||.
    double log_norm = 0.0;
    for (int m = 1; m <= iterations; ++m) {
      RSState y = apply_F(h, x);
      const double ratio = energy_norm(ops, y);
      est.ratio_sequence[m - 1] = std::max(est.ratio_sequence[m - 1], ratio);
      if (m == 1)
        est.one_step_max = std::max(est.one_step_max, ratio);
      if (!(ratio > 0.0)) {
        // F^m w = 0: all later iterates vanish too.
        break;
      }
      log_norm += std::log(ratio);
      est.root_sequence[m - 1] =
          std::max(est.root_sequence[m - 1], std::exp(log_norm / m));
      x = (1.0 / ratio) * y;
    }
  }
  est.rho_hat = std::max(est.root_sequence.back(), est.ratio_sequence.back());
  return est;
}

int find_contraction_horizon(const DiscreteOperators &ops, double dt,
                             int max_steps, double threshold, int probes,
                             int iterations, std::uint64_t seed) {
  auto below = [&](int steps) {
    ControlHorizon h(ops, dt, steps);
    return estimate_contraction(h, probes, iterations, seed).rho_hat < threshold;
  };
  if (max_steps < 1 || !below(max_steps))
    return -1;
  int lo = 0, hi = max_steps; // rho_hat(0) = 1 >= threshold for threshold <= 1
  while (hi - lo > 1) {
    const int mid = lo + (hi - lo) / 2;
    if (below(mid))
      hi = mid;
    else
      lo = mid;
  }
  return hi;
}

Eigen::VectorXd pack_state(const DiscreteOperators &ops, const RSState &s) {
  const Vec vf = restrict_free(ops, s.v);
  Eigen::VectorXd x(vf.size() + s.psi.size());
  x << vf, s.psi;
  return x;
}

RSState unpack_state(const DiscreteOperators &ops, const Eigen::VectorXd &x) {
  const int nf = static_cast<int>(ops.free_dofs.size());
  if (x.size() != nf + ops.psi_size())
    throw ValidationError("unpack_state: size mismatch");
  RSState s;
  s.v = prolong_free(ops, x.head(nf));
  s.psi = x.tail(ops.psi_size());
  return s;
}

Eigen::MatrixXd h_gram(const DiscreteOperators &ops) {
  const int nf = static_cast<int>(ops.free_dofs.size());
  const int np = ops.psi_size();
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(nf + np, nf + np);
  g.topLeftCorner(nf, nf) =
      Eigen::MatrixXd(ops.restriction * ops.mass_rho *
                      SpMat(ops.restriction.transpose()));
  for (int e = 0; e < ops.num_elements(); ++e)
    for (int j = 0; j < ops.num_branches(); ++j) {
      const int o = nf + ops.psi_offset(e, j);
      g.block<3, 3>(o, o) = ops.element_areas(e) * ops.stiffness[j];
    }
  return g;
}

Eigen::MatrixXd dense_F(const ControlHorizon &h) {
  const DiscreteOperators &ops = h.operators();
  const int dim = static_cast<int>(ops.free_dofs.size()) + ops.psi_size();
  Eigen::MatrixXd f(dim, dim);
  for (int c = 0; c < dim; ++c) {
    const RSState col = apply_F(h, unpack_state(ops, Eigen::VectorXd::Unit(dim, c)));
    f.col(c) = pack_state(ops, col);
  }
  return f;
}

double dense_energy_norm(const DiscreteOperators &ops,
                         const Eigen::MatrixXd &a) {
  // ||A||_G = ||L^T A L^{-T}||_2 for G = L L^T.
  const Eigen::LLT<Eigen::MatrixXd> llt(h_gram(ops));
  if (llt.info() != Eigen::Success)
    throw SolverError("dense_energy_norm: Gram matrix is not positive definite");
  // M = L^T A L^{-T}, i.e. solve M L^T = L^T A, i.e. L M^T = (L^T A)^T.
  const Eigen::MatrixXd lta = Eigen::MatrixXd(llt.matrixU()) * a;
  const Eigen::MatrixXd mt = llt.matrixL().solve(lta.transpose());
  return Eigen::JacobiSVD<Eigen::MatrixXd>(mt).singularValues()(0);
}

double relative_energy_error(const DiscreteOperators &ops, const RSState &a,
                             const RSState &reference) {
  const double d = energy_norm(ops, a - reference);
  const double r = energy_norm(ops, reference);
  return r > 0.0 ? d / r : d;
}

NeumannResult solve_initial_data(const ControlHorizon &h, const RSState &f,
                                 const RSState &g, double tol, int max_terms) {
  if (!(tol > 0.0))
    throw ValidationError("solve_initial_data: tolerance must be positive");
  const DiscreteOperators &ops = h.operators();
  NeumannResult res;
  RSState term = f - apply_Utilde(h, g);
  apply_dirichlet(ops, term.v);
  res.rhs_norm = energy_norm(ops, term);
  res.sum = term;
  res.terms = 1;
  double norm = res.rhs_norm;
  res.term_norms.push_back(norm);
  if (norm == 0.0)
    return res;

  int non_decreasing = 0;
  while (norm > tol * res.rhs_norm) {
    if (res.terms >= max_terms)
      throw SolverError("Neumann series did not reach tolerance within " +
                        std::to_string(max_terms) + " terms");
    term = apply_F(h, term);
    const double next = energy_norm(ops, term);
    res.sum += term;
    ++res.terms;
    res.term_norms.push_back(next);
    non_decreasing = next >= norm ? non_decreasing + 1 : 0;
    if (non_decreasing >= 5)
      throw SolverError("Neumann series diverges: term norms did not decrease "
                        "over 5 consecutive iterations (last " +
                        std::to_string(next) + ")");
    norm = next;
  }
  return res;
}

ControlResult synthesize_control(const ControlHorizon &h, const RSState &f,
                                 const RSState &g, double tol) {
  const DiscreteOperators &ops = h.operators();
  const int n = h.steps();
  ControlResult out;
  NeumannResult series = solve_initial_data(h, f, g, tol);
  out.initial_datum = series.sum;
  out.series_terms = series.terms;
  out.term_norms = std::move(series.term_norms);

  EvolutionConfig cfg;
  cfg.dt = h.dt();
  cfg.steps = n;
  cfg.alpha = 1;
  out.forward = evolve(h.stepper(), out.initial_datum, cfg);

  // Reversed problem: (v^, psi^)(T) = forward(T) - g, integrated backwards
  // as N U(t) N started from the terminal datum.
  const RSState hat_terminal = out.forward.states.back() - g;
  const Trajectory rev = evolve(h.stepper(), negate_velocity(hat_terminal), cfg);

  out.hat.resize(n + 1);
  out.tilde.resize(n + 1);
  for (int k = 0; k <= n; ++k) {
    out.hat[k] = negate_velocity(rev.states[n - k]);
    out.tilde[k] = out.forward.states[k] - out.hat[k];
  }
  out.hat_midpoint_velocities.resize(n);
  out.xi.resize(n);
  for (int k = 0; k < n; ++k) {
    out.hat_midpoint_velocities[k] = -rev.midpoint_velocities[n - 1 - k];
    // Traction is -v on the forward part and +v^ on the reversed part; the
    // tilde field sees the difference.
    const Vec sum = out.forward.midpoint_velocities[k] +
                    out.hat_midpoint_velocities[k];
    Vec xi = Vec::Zero(ops.v_size());
    for (int node : ops.neumann_nodes)
      xi.segment<2>(2 * node) = -sum.segment<2>(2 * node);
    out.xi[k] = std::move(xi);
  }
  out.terminal_error = relative_energy_error(ops, out.tilde.back(), g);
  out.initial_error = relative_energy_error(ops, out.tilde.front(), f);
  return out;
}

VerificationReport verify_control(const ControlHorizon &h,
                                  const std::vector<Vec> &xi, const RSState &f,
                                  const RSState &g,
                                  const std::vector<RSState> &constructed,
                                  double tol) {
  const DiscreteOperators &ops = h.operators();
  const int n = h.steps();
  if (static_cast<int>(xi.size()) != n)
    throw ValidationError("verify_control: expected one traction sample per step");
  if (static_cast<int>(constructed.size()) != n + 1)
    throw ValidationError("verify_control: constructed trajectory has the wrong "
                          "length");
  EvolutionConfig cfg;
  cfg.dt = h.dt();
  cfg.steps = n;
  cfg.alpha = 0;
  cfg.traction = xi;
  VerificationReport rep;
  rep.tolerance = tol;
  rep.resolved = evolve(ops, f, cfg);
  rep.terminal_error = relative_energy_error(ops, rep.resolved.states.back(), g);
  rep.initial_error = relative_energy_error(ops, rep.resolved.states.front(), f);

  double scale = 0.0;
  for (const RSState &s : constructed)
    scale = std::max(scale, energy_norm(ops, s));
  double worst = -1.0;
  for (int k = 0; k <= n; ++k) {
    const double d = energy_norm(ops, rep.resolved.states[k] - constructed[k]);
    if (d > worst) {
      worst = d;
      rep.worst_index = k;
    }
  }
  rep.trajectory_error = scale > 0.0 ? worst / scale : worst;
  rep.pass = rep.terminal_error <= tol && rep.trajectory_error <= tol;
  return rep;
}

} // namespace emm

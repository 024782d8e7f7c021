#ifndef EMM_TESTS_SUPPORT_HPP
#define EMM_TESTS_SUPPORT_HPP

// Shared fixtures and brute-force oracles. The dense model below is built
// from scratch (its own quadrature and gradient computation) so comparisons
// against the library do not share assembly code.

#include <cmath>
#include <random>
#include <vector>

#include <Eigen/Dense>

#include "emm/bvs.hpp"

namespace emm::testing {

inline DiscreteOperators make_ops(int m, MaterialModel mat = default_material()) {
  return assemble_operators(build_unit_square_mesh(m), mat);
}

inline MaterialModel single_branch(double lambda, double mu, double eta) {
  MaterialModel mat;
  mat.branches.push_back({isotropic_stiffness(lambda, mu), eta});
  return mat;
}

inline double rel_diff(const Eigen::VectorXd &a, const Eigen::VectorXd &b) {
  const double s = std::max(a.norm(), b.norm());
  return s > 0.0 ? (a - b).norm() / s : 0.0;
}

inline double rel_state_diff(const DiscreteOperators &ops, const RSState &a,
                             const RSState &b) {
  return relative_energy_error(ops, a, b);
}

/// Dense matrices of the semi-discrete system on [v_free ; psi].
struct DenseModel {
  int nf = 0, np = 0;
  Eigen::MatrixXd M;   // free x free
  Eigen::MatrixXd Mb;  // free x free
  Eigen::MatrixXd Mbf; // free x full (boundary load of a nodal trace)
  Eigen::MatrixXd S;   // 3E x free
  Eigen::VectorXd area;
  std::vector<Eigen::Matrix3d> C, A;
  std::vector<int> free;
};

inline DenseModel dense_model(const DiscreteOperators &ops) {
  const Mesh &mesh = ops.mesh;
  const int nn = mesh.num_nodes(), ne = mesh.num_elements();
  DenseModel d;
  std::vector<int> index(2 * nn, -1);
  for (int i = 0; i < nn; ++i)
    if (!ops.dirichlet_mask[i])
      for (int c = 0; c < 2; ++c) {
        index[2 * i + c] = static_cast<int>(d.free.size());
        d.free.push_back(2 * i + c);
      }
  d.nf = static_cast<int>(d.free.size());
  const int n = ops.num_branches();
  d.np = 3 * n * ne;
  Eigen::MatrixXd mfull = Eigen::MatrixXd::Zero(2 * nn, 2 * nn);
  Eigen::MatrixXd bfull = Eigen::MatrixXd::Zero(2 * nn, 2 * nn);
  Eigen::MatrixXd sfull = Eigen::MatrixXd::Zero(3 * ne, 2 * nn);
  d.area.resize(ne);
  const double r2 = std::sqrt(2.0);
  for (int e = 0; e < ne; ++e) {
    const auto &t = mesh.triangles[e];
    Eigen::Matrix3d aff;
    for (int a = 0; a < 3; ++a)
      aff.row(a) << 1.0, mesh.nodes(t[a], 0), mesh.nodes(t[a], 1);
    const double area = 0.5 * std::abs(aff.determinant());
    d.area(e) = area;
    // Columns of inv(aff) hold the coefficients (c0, cx, cy) of each hat.
    const Eigen::Matrix3d coef = aff.inverse();
    // Edge-midpoint rule: exact for quadratics on triangles.
    const double rho = ops.material.rho_at(e);
    for (int q = 0; q < 3; ++q) {
      Eigen::Vector3d phi = Eigen::Vector3d::Constant(0.5);
      phi(q) = 0.0;
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b)
          for (int c = 0; c < 2; ++c)
            mfull(2 * t[a] + c, 2 * t[b] + c) += rho * area / 3.0 * phi(a) * phi(b);
    }
    for (int a = 0; a < 3; ++a) {
      const double gx = coef(1, a), gy = coef(2, a);
      sfull(3 * e, 2 * t[a]) += gx;
      sfull(3 * e + 1, 2 * t[a] + 1) += gy;
      sfull(3 * e + 2, 2 * t[a]) += gy / r2;
      sfull(3 * e + 2, 2 * t[a] + 1) += gx / r2;
    }
  }
  const double g = 0.5 / std::sqrt(3.0);
  for (const auto &edge : mesh.boundary_edges) {
    if (edge.tag != BoundaryTag::Neumann)
      continue;
    const Eigen::Vector2d p0 = mesh.nodes.row(edge.nodes[0]);
    const Eigen::Vector2d p1 = mesh.nodes.row(edge.nodes[1]);
    const double len = (p1 - p0).norm();
    for (double s : {0.5 - g, 0.5 + g}) {
      const double phi[2] = {1.0 - s, s};
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
          for (int c = 0; c < 2; ++c)
            bfull(2 * edge.nodes[a] + c, 2 * edge.nodes[b] + c) +=
                0.5 * len * phi[a] * phi[b];
    }
  }
  d.M.resize(d.nf, d.nf);
  d.Mb.resize(d.nf, d.nf);
  d.Mbf.resize(d.nf, 2 * nn);
  d.S.resize(3 * ne, d.nf);
  for (int r = 0; r < d.nf; ++r) {
    for (int c = 0; c < d.nf; ++c) {
      d.M(r, c) = mfull(d.free[r], d.free[c]);
      d.Mb(r, c) = bfull(d.free[r], d.free[c]);
    }
    d.Mbf.row(r) = bfull.row(d.free[r]);
  }
  for (int c = 0; c < d.nf; ++c)
    d.S.col(c) = sfull.col(d.free[c]);
  for (const auto &b : ops.material.branches) {
    d.C.push_back(b.stiffness.kelvin);
    d.A.push_back(b.stiffness.kelvin / b.eta);
  }
  return d;
}

/// Generator L_h in packed coordinates, boundary mode alpha.
inline Eigen::MatrixXd dense_generator(const DenseModel &d, int alpha) {
  const int ne = static_cast<int>(d.area.size());
  const int n = static_cast<int>(d.C.size());
  const int dim = d.nf + d.np;
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(dim, dim);
  const Eigen::MatrixXd minv = d.M.inverse();
  Eigen::MatrixXd stress_load = Eigen::MatrixXd::Zero(d.nf, d.np);
  for (int e = 0; e < ne; ++e)
    for (int j = 0; j < n; ++j)
      stress_load.middleCols(3 * (e * n + j), 3) =
          d.area(e) * d.S.middleRows(3 * e, 3).transpose() * d.C[j];
  l.topLeftCorner(d.nf, d.nf) = -alpha * minv * d.Mb;
  l.topRightCorner(d.nf, d.np) = -minv * stress_load;
  for (int e = 0; e < ne; ++e)
    for (int j = 0; j < n; ++j) {
      const int o = d.nf + 3 * (e * n + j);
      l.block(o, 0, 3, d.nf) = d.S.middleRows(3 * e, 3);
      l.block(o, o, 3, 3) = -d.A[j];
    }
  return l;
}

/// Packed right-hand side contribution of a boundary trace g: M^{-1} M_b g.
inline Eigen::VectorXd dense_trace_term(const DenseModel &d, const Vec &g) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(d.nf + d.np);
  if (g.size() > 0)
    out.head(d.nf) = d.M.inverse() * (d.Mbf * g);
  return out;
}

inline Eigen::VectorXd pack(const DenseModel &d, const RSState &s) {
  Eigen::VectorXd x(d.nf + d.np);
  for (int k = 0; k < d.nf; ++k)
    x(k) = s.v(d.free[k]);
  x.tail(d.np) = s.psi;
  return x;
}

inline RSState unpack(const DenseModel &d, const DiscreteOperators &ops,
                      const Eigen::VectorXd &x) {
  RSState s = RSState::zero(ops);
  for (int k = 0; k < d.nf; ++k)
    s.v(d.free[k]) = x(k);
  s.psi = x.tail(d.np);
  return s;
}

/// Smooth deterministic state used across tests.
inline RSState smooth_state(const DiscreteOperators &ops, double a = 1.0) {
  RSState s = RSState::zero(ops);
  s.v = interpolate_field(ops, [a](double x, double y) {
    return Eigen::Vector2d(x * std::sin(a * y + 1.0), x * std::cos(a * x));
  });
  for (int e = 0; e < ops.num_elements(); ++e)
    for (int j = 0; j < ops.num_branches(); ++j) {
      const Eigen::Vector2d c = ops.mesh.centroid(e);
      s.psi_block(ops, e, j) << std::sin(a * c.x() + j), std::cos(a * c.y()),
          a * c.x() * c.y();
    }
  return s;
}

} // namespace emm::testing

#endif // EMM_TESTS_SUPPORT_HPP

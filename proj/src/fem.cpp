#include "emm/fem.hpp"

#include <Eigen/Dense>

#include "emm/error.hpp"

namespace emm {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

SpMat from_triplets(int rows, int cols, const Triplets &t) {
  SpMat m(rows, cols);
  m.setFromTriplets(t.begin(), t.end());
  return m;
}

} // namespace

RSState RSState::zero(const DiscreteOperators &ops) {
  return {Vec::Zero(ops.v_size()), Vec::Zero(ops.psi_size())};
}

RSState &RSState::operator+=(const RSState &o) {
  v += o.v;
  psi += o.psi;
  return *this;
}

RSState &RSState::operator-=(const RSState &o) {
  v -= o.v;
  psi -= o.psi;
  return *this;
}

RSState &RSState::operator*=(double s) {
  v *= s;
  psi *= s;
  return *this;
}

RSState operator+(RSState a, const RSState &b) { return a += b; }
RSState operator-(RSState a, const RSState &b) { return a -= b; }
RSState operator*(double s, RSState a) { return a *= s; }

DiscreteOperators assemble_operators(const Mesh &mesh,
                                     const MaterialModel &material) {
  validate_material(material);
  validate_mesh(mesh);
  if (material.rho.size() != 1 && material.rho.size() != mesh.num_elements())
    throw ValidationError(
        "density list has " + std::to_string(material.rho.size()) +
        " entries but the mesh has " + std::to_string(mesh.num_elements()) +
        " elements");

  DiscreteOperators ops;
  ops.mesh = mesh;
  ops.material = material;
  for (const auto &b : material.branches) {
    ops.stiffness.push_back(b.stiffness.kelvin);
    ops.relaxation.push_back(b.stiffness.kelvin / b.eta);
    ops.viscosity.push_back(b.eta);
  }

  const int nn = mesh.num_nodes();
  const int ne = mesh.num_elements();
  ops.element_areas.resize(ne);

  Triplets mass, strain;
  mass.reserve(36 * ne);
  strain.reserve(12 * ne);
  const double r2 = sqrt2<double>();
  for (int e = 0; e < ne; ++e) {
    const auto &t = mesh.triangles[e];
    const double area = mesh.area(e);
    ops.element_areas(e) = area;
    const double rho = material.rho_at(e);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        const double m = rho * area / 12.0 * (a == b ? 2.0 : 1.0);
        for (int c = 0; c < 2; ++c)
          mass.emplace_back(2 * t[a] + c, 2 * t[b] + c, m);
      }
    for (int a = 0; a < 3; ++a) {
      const Eigen::Vector2d p1 = mesh.nodes.row(t[(a + 1) % 3]);
      const Eigen::Vector2d p2 = mesh.nodes.row(t[(a + 2) % 3]);
      const double dx = (p1.y() - p2.y()) / (2.0 * area); // d(phi_a)/dx
      const double dy = (p2.x() - p1.x()) / (2.0 * area); // d(phi_a)/dy
      strain.emplace_back(3 * e + 0, 2 * t[a] + 0, dx);
      strain.emplace_back(3 * e + 1, 2 * t[a] + 1, dy);
      strain.emplace_back(3 * e + 2, 2 * t[a] + 0, dy / r2);
      strain.emplace_back(3 * e + 2, 2 * t[a] + 1, dx / r2);
    }
  }
  ops.mass_rho = from_triplets(2 * nn, 2 * nn, mass);
  ops.strain = from_triplets(3 * ne, 2 * nn, strain);

  Triplets bmass;
  ops.dirichlet_mask.assign(nn, false);
  for (const auto &edge : mesh.boundary_edges) {
    if (edge.tag == BoundaryTag::Dirichlet) {
      ops.dirichlet_mask[edge.nodes[0]] = true;
      ops.dirichlet_mask[edge.nodes[1]] = true;
      continue;
    }
    const double len = mesh.length(edge);
    for (int a = 0; a < 2; ++a)
      for (int b = 0; b < 2; ++b)
        for (int c = 0; c < 2; ++c)
          bmass.emplace_back(2 * edge.nodes[a] + c, 2 * edge.nodes[b] + c,
                             len / 6.0 * (a == b ? 2.0 : 1.0));
  }
  ops.boundary_mass_N = from_triplets(2 * nn, 2 * nn, bmass);

  std::vector<bool> on_neumann(nn, false);
  for (const auto &edge : mesh.boundary_edges)
    if (edge.tag == BoundaryTag::Neumann) {
      on_neumann[edge.nodes[0]] = true;
      on_neumann[edge.nodes[1]] = true;
    }
  for (int i = 0; i < nn; ++i) {
    if (ops.dirichlet_mask[i])
      continue;
    ops.free_dofs.push_back(2 * i);
    ops.free_dofs.push_back(2 * i + 1);
    if (on_neumann[i])
      ops.neumann_nodes.push_back(i);
  }
  Triplets sel;
  for (std::size_t k = 0; k < ops.free_dofs.size(); ++k)
    sel.emplace_back(static_cast<int>(k), ops.free_dofs[k], 1.0);
  ops.restriction =
      from_triplets(static_cast<int>(ops.free_dofs.size()), 2 * nn, sel);

  auto factor = std::make_shared<Eigen::SimplicialLLT<SpMat>>();
  const SpMat mfree =
      ops.restriction * ops.mass_rho * SpMat(ops.restriction.transpose());
  factor->compute(mfree);
  if (factor->info() != Eigen::Success)
    throw SolverError("mass matrix is not positive definite on the free dofs");
  ops.mass_factor = factor;
  return ops;
}

KelvinMat3 branch_schur_factor(const DiscreteOperators &ops, int branch,
                               double lambda) {
  const KelvinMat3 shifted =
      lambda * KelvinMat3::Identity() + ops.relaxation[branch];
  // C (lambda I + A)^{-1} is symmetric since C and A = C / eta commute.
  KelvinMat3 f = ops.stiffness[branch] * shifted.inverse();
  return 0.5 * (f + f.transpose());
}

SpMat schur_matrix(const DiscreteOperators &ops, double lambda, int alpha) {
  if (!(lambda > 0.0))
    throw ValidationError("schur_matrix requires lambda > 0");
  if (alpha < -1 || alpha > 1)
    throw ValidationError("boundary mode alpha must be -1, 0 or +1");
  KelvinMat3 factor = KelvinMat3::Zero();
  for (int j = 0; j < ops.num_branches(); ++j)
    factor += branch_schur_factor(ops, j, lambda);

  const int ne = ops.num_elements();
  Triplets w;
  w.reserve(9 * ne);
  for (int e = 0; e < ne; ++e)
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c)
        w.emplace_back(3 * e + r, 3 * e + c, ops.element_areas(e) * factor(r, c));
  const SpMat weighted = from_triplets(3 * ne, 3 * ne, w);
  const SpMat st = ops.strain.transpose();
  SpMat full = SpMat(st * weighted * ops.strain) + lambda * ops.mass_rho +
               static_cast<double>(alpha) * ops.boundary_mass_N;
  return ops.restriction * full * SpMat(ops.restriction.transpose());
}

Vec apply_strain(const DiscreteOperators &ops, const Vec &v) {
  return ops.strain * v;
}

Vec strain_adjoint(const DiscreteOperators &ops, const Vec &tau) {
  Vec weighted = tau;
  for (int e = 0; e < ops.num_elements(); ++e)
    weighted.segment<3>(3 * e) *= ops.element_areas(e);
  return ops.strain.transpose() * weighted;
}

Vec total_stress(const DiscreteOperators &ops, const Vec &psi) {
  Vec sigma = Vec::Zero(3 * ops.num_elements());
  for (int e = 0; e < ops.num_elements(); ++e)
    for (int j = 0; j < ops.num_branches(); ++j)
      sigma.segment<3>(3 * e) +=
          ops.stiffness[j] * psi.segment<3>(ops.psi_offset(e, j));
  return sigma;
}

Vec stress_load(const DiscreteOperators &ops, const Vec &psi) {
  return strain_adjoint(ops, total_stress(ops, psi));
}

Vec replicate_to_branches(const DiscreteOperators &ops, const Vec &tau) {
  Vec psi(ops.psi_size());
  for (int e = 0; e < ops.num_elements(); ++e)
    for (int j = 0; j < ops.num_branches(); ++j)
      psi.segment<3>(ops.psi_offset(e, j)) = tau.segment<3>(3 * e);
  return psi;
}

Vec restrict_free(const DiscreteOperators &ops, const Vec &full) {
  return ops.restriction * full;
}

Vec prolong_free(const DiscreteOperators &ops, const Vec &free) {
  return ops.restriction.transpose() * free;
}

void apply_dirichlet(const DiscreteOperators &ops, Vec &v) {
  for (int i = 0; i < ops.num_nodes(); ++i)
    if (ops.dirichlet_mask[i])
      v.segment<2>(2 * i).setZero();
}

Vec mass_solve(const DiscreteOperators &ops, const Vec &load) {
  return prolong_free(ops, ops.mass_factor->solve(restrict_free(ops, load)));
}

double h_inner(const DiscreteOperators &ops, const RSState &a,
               const RSState &b) {
  double s = a.v.dot(ops.mass_rho * b.v);
  for (int e = 0; e < ops.num_elements(); ++e)
    for (int j = 0; j < ops.num_branches(); ++j)
      s += ops.element_areas(e) *
           a.psi_block(ops, e, j).dot(ops.stiffness[j] * b.psi_block(ops, e, j));
  return s;
}

double h_norm(const DiscreteOperators &ops, const RSState &a) {
  return std::sqrt(std::max(0.0, h_inner(ops, a, a)));
}

RSState apply_generator(const DiscreteOperators &ops, int alpha,
                        const RSState &s) {
  RSState out;
  Vec load = -stress_load(ops, s.psi);
  if (alpha != 0)
    load -= static_cast<double>(alpha) * (ops.boundary_mass_N * s.v);
  out.v = mass_solve(ops, load);
  const Vec ev = apply_strain(ops, s.v);
  out.psi.resize(ops.psi_size());
  for (int e = 0; e < ops.num_elements(); ++e)
    for (int j = 0; j < ops.num_branches(); ++j)
      out.psi_block(ops, e, j) =
          -ops.relaxation[j] * s.psi_block(ops, e, j) + ev.segment<3>(3 * e);
  return out;
}

Vec interpolate_field(const DiscreteOperators &ops,
                      const std::function<Eigen::Vector2d(double, double)> &f) {
  Vec v(ops.v_size());
  for (int i = 0; i < ops.num_nodes(); ++i)
    v.segment<2>(2 * i) = f(ops.mesh.nodes(i, 0), ops.mesh.nodes(i, 1));
  apply_dirichlet(ops, v);
  return v;
}

} // namespace emm

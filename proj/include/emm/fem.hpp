#ifndef EMM_FEM_HPP
#define EMM_FEM_HPP

// P1 (continuous piecewise-linear) velocities and P0 (piecewise-constant)
// per-branch strain tensors on a triangulated domain.
//
// Layouts
//   nodal vector field : size 2 * num_nodes, interleaved (x, y) per node
//   element tensors    : size 3 * num_elements, Kelvin triple per element
//   branch tensors psi : size 3 * n * num_elements, block (element, branch)

#include <functional>
#include <memory>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "emm/material.hpp"
#include "emm/mesh.hpp"

namespace emm {

using SpMat = Eigen::SparseMatrix<double>;
using Vec = Eigen::VectorXd;

/// Assembled, immutable discrete operators for one (mesh, material) pair.
struct DiscreteOperators {
  Mesh mesh;
  MaterialModel material;

  SpMat mass_rho;        // (v, w)_rho on the full nodal space
  SpMat boundary_mass_N; // (v, w) over the Neumann boundary
  SpMat strain;          // nodal field -> element Kelvin strain
  Vec element_areas;
  std::vector<bool> dirichlet_mask; // per node: v = 0 enforced
  std::vector<int> free_dofs;       // nodal dofs not on the Dirichlet part
  std::vector<int> neumann_nodes;   // free nodes touched by a Neumann edge
  SpMat restriction;                // free_dofs x full selection
  std::shared_ptr<const Eigen::SimplicialLLT<SpMat>> mass_factor; // free block

  // Per-branch material data (uniform in space); rho may vary per element.
  std::vector<KelvinMat3> stiffness;   // C_j
  std::vector<KelvinMat3> relaxation;  // eta_j^{-1} C_j
  std::vector<double> viscosity;       // eta_j

  int num_nodes() const { return mesh.num_nodes(); }
  int num_elements() const { return mesh.num_elements(); }
  int num_branches() const { return static_cast<int>(stiffness.size()); }
  int v_size() const { return 2 * num_nodes(); }
  int psi_size() const { return 3 * num_branches() * num_elements(); }
  int psi_offset(int element, int branch) const {
    return 3 * (element * num_branches() + branch);
  }
};

/// Phase point (v, psi) of the reduced system.
struct RSState {
  Vec v;
  Vec psi;

  static RSState zero(const DiscreteOperators &ops);

  auto psi_block(const DiscreteOperators &ops, int element, int branch) {
    return psi.segment<3>(ops.psi_offset(element, branch));
  }
  auto psi_block(const DiscreteOperators &ops, int element, int branch) const {
    return psi.segment<3>(ops.psi_offset(element, branch));
  }

  RSState &operator+=(const RSState &o);
  RSState &operator-=(const RSState &o);
  RSState &operator*=(double s);
};

RSState operator+(RSState a, const RSState &b);
RSState operator-(RSState a, const RSState &b);
RSState operator*(double s, RSState a);

DiscreteOperators assemble_operators(const Mesh &mesh,
                                     const MaterialModel &material);

/// Matrix of B(v, w) = sum_j (C_j (lambda I + eta_j^{-1} C_j)^{-1} e[v], e[w])
///                    + lambda (v, w)_rho + alpha (v, w)_{Gamma_N}
/// on the free (Dirichlet-constrained) dofs.
SpMat schur_matrix(const DiscreteOperators &ops, double lambda, int alpha);

/// Per-branch factor C_j (lambda I + eta_j^{-1} C_j)^{-1}.
KelvinMat3 branch_schur_factor(const DiscreteOperators &ops, int branch,
                               double lambda);

/// e[v] per element (Kelvin).
Vec apply_strain(const DiscreteOperators &ops, const Vec &v);
/// Transpose of the strain map against area weights: w -> sum_e |e| tau_e . e[w]
/// returned as a nodal load vector.
Vec strain_adjoint(const DiscreteOperators &ops, const Vec &tau);
/// Nodal load sum_j (C_j psi_j, e[w]) for every basis w.
Vec stress_load(const DiscreteOperators &ops, const Vec &psi);
/// Elementwise sum_j C_j psi_j.
Vec total_stress(const DiscreteOperators &ops, const Vec &psi);
/// Replicates an element tensor field into every branch slot.
Vec replicate_to_branches(const DiscreteOperators &ops, const Vec &tau);

/// Solves M x = load on the free dofs; Dirichlet entries of x are zero.
Vec mass_solve(const DiscreteOperators &ops, const Vec &load);
Vec restrict_free(const DiscreteOperators &ops, const Vec &full);
Vec prolong_free(const DiscreteOperators &ops, const Vec &free);
void apply_dirichlet(const DiscreteOperators &ops, Vec &v);

/// Discrete H inner product (v, v')_rho + sum_j (C_j psi_j, psi'_j).
double h_inner(const DiscreteOperators &ops, const RSState &a,
               const RSState &b);
double h_norm(const DiscreteOperators &ops, const RSState &a);

/// Discrete generator L_h for boundary mode alpha (traction -alpha v):
///   v-part  : M^{-1}(-sum_j S^T W C_j psi_j - alpha M_N v)
///   psi-part: -eta_j^{-1} C_j psi_j + e[v]
RSState apply_generator(const DiscreteOperators &ops, int alpha,
                        const RSState &s);

/// Nodal interpolant of a vector field f(x, y); Dirichlet nodes are zeroed.
Vec interpolate_field(const DiscreteOperators &ops,
                      const std::function<Eigen::Vector2d(double, double)> &f);

} // namespace emm

#endif // EMM_FEM_HPP

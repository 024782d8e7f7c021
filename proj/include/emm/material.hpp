#ifndef EMM_MATERIAL_HPP
#define EMM_MATERIAL_HPP

#include <string>
#include <vector>

#include <Eigen/Core>

#include "emm/tensors.hpp"

namespace emm {

/// One Maxwell unit: spring C_j in series with a dashpot of viscosity eta_j.
struct MaxwellBranch {
  Stiffness<double> stiffness;
  double eta = 1.0;
};

/// Extended Maxwell model: n branches in parallel plus a density field.
/// rho holds either one value (uniform) or one value per mesh element.
struct MaterialModel {
  std::vector<MaxwellBranch> branches;
  Eigen::VectorXd rho = Eigen::VectorXd::Ones(1);

  int n() const { return static_cast<int>(branches.size()); }
  double rho_at(int element) const {
    return rho.size() == 1 ? rho(0) : rho(element);
  }
};

/// Lower bounds certified by validate_material.
struct MaterialReport {
  double alpha0 = 0.0; // min over branches of the smallest eigenvalue of C_j
  double beta0 = 0.0;  // min eta_j
  double gamma0 = 0.0; // min rho
};

/// Checks strong convexity of every C_j, eta_j > 0 and rho > 0. Every
/// violated clause is listed in the thrown ValidationError with its branch
/// (1-based) or element index.
MaterialReport validate_material(const MaterialModel &model);

/// Two isotropic branches used by the experiments and the CLI default:
/// (lambda=1, mu=1, eta=1) and (lambda=2, mu=1.5, eta=2), rho = 1.
MaterialModel default_material();

/// Parses the material text format:
///
///   n = 2
///   rho = 1.0            # or a per-element list [r0, r1, ...]
///   [branch.1]
///   lambda = 1
///   mu = 1
///   eta = 1
///   [branch.2]
///   kelvin = [3, 1, 0, 1, 3, 0, 0, 0, 2]
///   eta = 2
MaterialModel parse_material(const std::string &text);
MaterialModel load_material(const std::string &path);

} // namespace emm

#endif // EMM_MATERIAL_HPP

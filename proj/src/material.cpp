#include "emm/material.hpp"

#include <fstream>
#include <limits>
#include <sstream>

#include "emm/config.hpp"
#include "emm/error.hpp"

namespace emm {

MaterialReport validate_material(const MaterialModel &model) {
  std::ostringstream violations;
  if (model.branches.empty())
    violations << "material has no branches (n >= 1 required); ";
  if (model.rho.size() == 0)
    violations << "density field is empty; ";

  MaterialReport report;
  report.alpha0 = std::numeric_limits<double>::infinity();
  report.beta0 = std::numeric_limits<double>::infinity();
  for (int j = 0; j < model.n(); ++j) {
    const auto &b = model.branches[j];
    const auto &k = b.stiffness.kelvin;
    if (!(k - k.transpose()).isZero(0.0))
      violations << "branch " << j + 1
                 << ": stiffness lacks full symmetry; ";
    const double lmin = b.stiffness.min_eigenvalue();
    if (!(lmin > 0.0))
      violations << "branch " << j + 1
                 << ": strong convexity violated (smallest eigenvalue "
                 << lmin << " <= 0); ";
    if (!(b.eta > 0.0))
      violations << "branch " << j + 1 << ": viscosity eta = " << b.eta
                 << " must be positive; ";
    report.alpha0 = std::min(report.alpha0, lmin);
    report.beta0 = std::min(report.beta0, b.eta);
  }
  report.gamma0 = std::numeric_limits<double>::infinity();
  for (Eigen::Index e = 0; e < model.rho.size(); ++e) {
    if (!(model.rho(e) > 0.0))
      violations << "density rho = " << model.rho(e) << " at element " << e + 1
                 << " must be positive; ";
    report.gamma0 = std::min(report.gamma0, model.rho(e));
  }
  const std::string msg = violations.str();
  if (!msg.empty())
    throw ValidationError("invalid material: " + msg.substr(0, msg.size() - 2));
  return report;
}

MaterialModel default_material() {
  MaterialModel m;
  m.branches.push_back({isotropic_stiffness(1.0, 1.0), 1.0});
  m.branches.push_back({isotropic_stiffness(2.0, 1.5), 2.0});
  m.rho = Eigen::VectorXd::Ones(1);
  return m;
}

MaterialModel parse_material(const std::string &text) {
  const ConfigDoc doc = ConfigDoc::parse(text);
  const long n = doc.get_int("", "n");
  if (n < 1)
    throw ParseError("material: n must be >= 1");
  MaterialModel m;
  if (doc.is_list("", "rho")) {
    const auto values = doc.get_list("", "rho");
    if (values.empty())
      throw ParseError("material: rho list is empty");
    m.rho = Eigen::Map<const Eigen::VectorXd>(values.data(),
                                              static_cast<Eigen::Index>(values.size()));
  } else {
    m.rho = Eigen::VectorXd::Constant(1, doc.get_double("", "rho"));
  }
  for (long j = 1; j <= n; ++j) {
    const std::string sec = "branch." + std::to_string(j);
    MaxwellBranch b;
    b.eta = doc.get_double(sec, "eta");
    if (doc.has(sec, "kelvin")) {
      const auto k = doc.get_list(sec, "kelvin");
      if (k.size() != 9)
        throw ParseError("material: [" + sec +
                         "] kelvin needs 9 entries (row-major 3x3)");
      KelvinMat3 km;
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
          km(r, c) = k[3 * r + c];
      b.stiffness = stiffness_from_kelvin(km);
    } else {
      b.stiffness = isotropic_stiffness(doc.get_double(sec, "lambda"),
                                        doc.get_double(sec, "mu"));
    }
    m.branches.push_back(b);
  }
  return m;
}

MaterialModel load_material(const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw ParseError("cannot open material file '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_material(buf.str());
}

} // namespace emm

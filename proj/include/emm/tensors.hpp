#ifndef EMM_TENSORS_HPP
#define EMM_TENSORS_HPP

// Symmetric 2x2 tensors in Kelvin (orthonormal) coordinates:
//   w = [[w11, w12], [w12, w22]]  <->  (w11, w22, sqrt(2) w12)
// so the Frobenius product of tensors is the Euclidean dot product of their
// Kelvin vectors and a fourth-order tensor with full symmetry becomes an
// honest symmetric 3x3 matrix.

#include <cmath>
#include <sstream>

#include <Eigen/Dense>

#include "emm/error.hpp"

namespace emm {

template <typename Scalar> using KelvinVec = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar> using KelvinMat = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar> using SymTensor = Eigen::Matrix<Scalar, 2, 2>;

using KelvinVec3 = KelvinVec<double>;
using KelvinMat3 = KelvinMat<double>;

template <typename Scalar> constexpr Scalar sqrt2() {
  return static_cast<Scalar>(1.41421356237309504880168872420969808L);
}

template <typename Derived>
KelvinVec<typename Derived::Scalar>
kelvin_from_tensor(const Eigen::MatrixBase<Derived> &w,
                   typename Derived::Scalar tol = 1e-12) {
  using Scalar = typename Derived::Scalar;
  static_assert(Derived::RowsAtCompileTime == 2 &&
                    Derived::ColsAtCompileTime == 2,
                "kelvin_from_tensor expects a 2x2 matrix");
  const Scalar scale = std::max<Scalar>(Scalar(1), w.cwiseAbs().maxCoeff());
  if (std::abs(w(0, 1) - w(1, 0)) > tol * scale) {
    std::ostringstream msg;
    msg << "tensor is not symmetric: entry (0,1)=" << w(0, 1)
        << " differs from entry (1,0)=" << w(1, 0);
    throw ValidationError(msg.str());
  }
  const Scalar shear = (w(0, 1) + w(1, 0)) / Scalar(2);
  return KelvinVec<Scalar>(w(0, 0), w(1, 1), sqrt2<Scalar>() * shear);
}

template <typename Derived>
SymTensor<typename Derived::Scalar>
tensor_from_kelvin(const Eigen::MatrixBase<Derived> &k) {
  using Scalar = typename Derived::Scalar;
  const Scalar shear = k(2) / sqrt2<Scalar>();
  SymTensor<Scalar> w;
  w << k(0), shear, shear, k(1);
  return w;
}

/// Stiffness tensor C acting on symmetric tensors, stored as its Kelvin matrix.
template <typename Scalar> struct Stiffness {
  KelvinMat<Scalar> kelvin = KelvinMat<Scalar>::Zero();

  KelvinVec<Scalar> apply(const KelvinVec<Scalar> &w) const {
    return kelvin * w;
  }
  /// (Cw)w
  Scalar quadratic_form(const KelvinVec<Scalar> &w) const {
    return w.dot(kelvin * w);
  }
  Scalar min_eigenvalue() const {
    Eigen::SelfAdjointEigenSolver<KelvinMat<Scalar>> es(kelvin,
                                                        Eigen::EigenvaluesOnly);
    return es.eigenvalues()(0);
  }
};

/// Stiffness from an explicit Kelvin matrix; the matrix must be exactly
/// symmetric (full symmetry of C).
template <typename Scalar>
Stiffness<Scalar> stiffness_from_kelvin(const KelvinMat<Scalar> &m) {
  for (int r = 0; r < 3; ++r)
    for (int c = r + 1; c < 3; ++c)
      if (m(r, c) != m(c, r)) {
        std::ostringstream msg;
        msg << "stiffness Kelvin matrix is not symmetric at (" << r << ","
            << c << ")";
        throw ValidationError(msg.str());
      }
  return Stiffness<Scalar>{m};
}

/// Isotropic stiffness C w = lambda tr(w) I + 2 mu w.
template <typename Scalar>
Stiffness<Scalar> isotropic_stiffness(Scalar lambda, Scalar mu) {
  if (!(mu > Scalar(0)))
    throw ValidationError("isotropic stiffness requires mu > 0 (strong "
                          "convexity)");
  if (lambda < Scalar(0))
    throw ValidationError("isotropic stiffness requires lambda >= 0");
  KelvinMat<Scalar> m;
  m << lambda + 2 * mu, lambda, 0, //
      lambda, lambda + 2 * mu, 0,  //
      0, 0, 2 * mu;
  return Stiffness<Scalar>{m};
}

/// exp(-t eta^{-1} C) in Kelvin coordinates, by eigen-decomposition of the
/// symmetric matrix eta^{-1} C.
template <typename Scalar>
KelvinMat<Scalar> branch_exponential(Scalar t, Scalar eta,
                                     const Stiffness<Scalar> &c) {
  if (t < Scalar(0))
    throw ValidationError("branch_exponential requires t >= 0");
  Eigen::SelfAdjointEigenSolver<KelvinMat<Scalar>> es(c.kelvin / eta);
  const KelvinVec<Scalar> decay =
      (-t * es.eigenvalues().array()).exp().matrix();
  return es.eigenvectors() * decay.asDiagonal() *
         es.eigenvectors().transpose();
}

} // namespace emm

#endif // EMM_TENSORS_HPP

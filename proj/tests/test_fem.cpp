#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "support.hpp"

#include "emm/error.hpp"

using namespace emm;
using namespace emm::testing;

namespace {

Eigen::MatrixXd free_block(const DiscreteOperators &ops, const SpMat &m) {
  return Eigen::MatrixXd(ops.restriction * m * SpMat(ops.restriction.transpose()));
}

} // namespace

TEST_CASE("assembled matrices match an independent dense assembly") {
  for (int m : {1, 2, 3}) {
    const auto ops = make_ops(m);
    const DenseModel d = dense_model(ops);
    CHECK((free_block(ops, ops.mass_rho) - d.M).norm() <= 1e-14 * d.M.norm());
    CHECK((free_block(ops, ops.boundary_mass_N) - d.Mb).norm() <= 1e-14 * d.Mb.norm());
    const Eigen::MatrixXd s =
        Eigen::MatrixXd(ops.strain * SpMat(ops.restriction.transpose()));
    CHECK((s - d.S).norm() <= 1e-12 * d.S.norm());
    CHECK((ops.element_areas - d.area).norm() <= 1e-15);
  }
}

TEST_CASE("mass entries per component sum to the integral of rho") {
  const auto ops = make_ops(1);
  double sx = 0.0, sy = 0.0;
  const Eigen::MatrixXd m(ops.mass_rho);
  for (int r = 0; r < m.rows(); ++r)
    for (int c = 0; c < m.cols(); ++c) {
      if (r % 2 == 0 && c % 2 == 0)
        sx += m(r, c);
      if (r % 2 == 1 && c % 2 == 1)
        sy += m(r, c);
      if (r % 2 != c % 2)
        CHECK(m(r, c) == 0.0);
    }
  CHECK(sx == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(sy == doctest::Approx(1.0).epsilon(1e-14));

  MaterialModel mat = default_material();
  mat.rho = Eigen::VectorXd::LinSpaced(8, 1.0, 2.0);
  const auto ops2 = make_ops(2, mat);
  const Eigen::MatrixXd m2(ops2.mass_rho);
  double s2 = 0.0, want = 0.0;
  for (int r = 0; r < m2.rows(); r += 2)
    for (int c = 0; c < m2.cols(); c += 2)
      s2 += m2(r, c);
  for (int e = 0; e < 8; ++e)
    want += mat.rho(e) * ops2.element_areas(e);
  CHECK(s2 == doctest::Approx(want).epsilon(1e-14));
}

TEST_CASE("density list must match the element count") {
  MaterialModel mat = default_material();
  mat.rho = Eigen::VectorXd::Ones(3);
  CHECK_THROWS_AS(make_ops(2, mat), ValidationError);
}

TEST_CASE("strain of rigid translations and linear fields") {
  const auto ops = make_ops(3);
  Vec tx = Vec::Zero(ops.v_size()), ty = tx, lin = tx, shear = tx;
  for (int i = 0; i < ops.num_nodes(); ++i) {
    tx(2 * i) = 1.0;
    ty(2 * i + 1) = 1.0;
    lin(2 * i) = ops.mesh.nodes(i, 0);
    shear(2 * i) = ops.mesh.nodes(i, 1); // u = (y, 0): e12 = 1/2
  }
  CHECK(apply_strain(ops, tx).cwiseAbs().maxCoeff() <= 1e-13);
  CHECK(apply_strain(ops, ty).cwiseAbs().maxCoeff() <= 1e-13);
  const Vec el = apply_strain(ops, lin), es = apply_strain(ops, shear);
  for (int e = 0; e < ops.num_elements(); ++e) {
    CHECK((el.segment<3>(3 * e) - Eigen::Vector3d(1, 0, 0)).norm() <= 1e-13);
    CHECK((es.segment<3>(3 * e) - Eigen::Vector3d(0, 0, 0.5 * std::sqrt(2.0))).norm() <= 1e-13);
  }
}

TEST_CASE("strain adjoint consistency on random inputs") {
  const auto ops = make_ops(4);
  std::mt19937_64 rng(41);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 20; ++trial) {
    Vec w(ops.v_size()), tau(3 * ops.num_elements());
    for (auto &x : w) x = g(rng);
    for (auto &x : tau) x = g(rng);
    const Vec sw = apply_strain(ops, w);
    double lhs = 0.0;
    for (int e = 0; e < ops.num_elements(); ++e)
      lhs += ops.element_areas(e) * sw.segment<3>(3 * e).dot(tau.segment<3>(3 * e));
    const double rhs = w.dot(strain_adjoint(ops, tau));
    CHECK(std::abs(lhs - rhs) <= 1e-12 * std::max(1.0, std::abs(lhs)));
  }
}

TEST_CASE("mass is SPD on the constrained space, boundary mass PSD on Neumann nodes") {
  const auto ops = make_ops(3);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> em(free_block(ops, ops.mass_rho));
  CHECK(em.eigenvalues()(0) > 0.0);
  const Eigen::MatrixXd mb(ops.boundary_mass_N);
  CHECK((mb - mb.transpose()).norm() == 0.0);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eb(mb);
  CHECK(eb.eigenvalues()(0) >= -1e-14);
  std::vector<bool> on_neumann(ops.num_nodes(), false);
  for (const auto &b : ops.mesh.boundary_edges)
    if (b.tag == BoundaryTag::Neumann)
      on_neumann[b.nodes[0]] = on_neumann[b.nodes[1]] = true;
  for (int i = 0; i < ops.num_nodes(); ++i)
    if (!on_neumann[i])
      CHECK(mb.row(2 * i).norm() + mb.row(2 * i + 1).norm() == 0.0);
  // Total boundary length of the Neumann part is 3.
  double total = 0.0;
  for (int r = 0; r < mb.rows(); r += 2)
    for (int c = 0; c < mb.cols(); c += 2)
      total += mb(r, c);
  CHECK(total == doctest::Approx(3.0).epsilon(1e-14));
}

TEST_CASE("discrete Korn inequality on meshes 1, 2, 4") {
  for (int m : {1, 2, 4}) {
    const auto ops = make_ops(m);
    const DenseModel d = dense_model(ops);
    Eigen::MatrixXd k = Eigen::MatrixXd::Zero(d.nf, d.nf);
    for (int e = 0; e < ops.num_elements(); ++e)
      for (const auto &c : d.C)
        k += d.area(e) * d.S.middleRows(3 * e, 3).transpose() * c *
             d.S.middleRows(3 * e, 3);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(k);
    CHECK(es.eigenvalues()(0) > 1e-8);
  }
}

TEST_CASE("schur matrix examples") {
  SUBCASE("single branch C = I, eta = 1, lambda = 1 gives branch factor I/2") {
    const auto ops = make_ops(1, single_branch(0.0, 0.5, 1.0));
    CHECK((branch_schur_factor(ops, 0, 1.0) - 0.5 * KelvinMat3::Identity()).norm() == 0.0);
  }
  SUBCASE("large lambda approaches lambda M + alpha M_N") {
    const auto ops = make_ops(2);
    const double lam = 1e6;
    const Eigen::MatrixXd b(schur_matrix(ops, lam, 1));
    const Eigen::MatrixXd approx =
        lam * free_block(ops, ops.mass_rho) + free_block(ops, ops.boundary_mass_N);
    CHECK((b - approx).norm() / b.norm() <= 1e-5);
  }
  SUBCASE("alpha = +1 on m = 2 admits a Cholesky factorization") {
    const auto ops = make_ops(2);
    for (double lam : {1e-3, 0.1, 1.0, 200.0}) {
      Eigen::SimplicialLLT<SpMat> llt(schur_matrix(ops, lam, 1));
      CHECK(llt.info() == Eigen::Success);
    }
  }
  SUBCASE("lambda <= 0 is rejected") {
    const auto ops = make_ops(1);
    CHECK_THROWS_AS(schur_matrix(ops, 0.0, 1), ValidationError);
    CHECK_THROWS_AS(schur_matrix(ops, -1.0, 0), ValidationError);
  }
}

TEST_CASE("schur matrix matches the dense substitution formula") {
  const auto ops = make_ops(2);
  const DenseModel d = dense_model(ops);
  for (int alpha : {-1, 0, 1})
    for (double lam : {0.3, 2.0, 50.0}) {
      Eigen::MatrixXd b = lam * d.M + alpha * d.Mb;
      for (int e = 0; e < ops.num_elements(); ++e)
        for (std::size_t j = 0; j < d.C.size(); ++j) {
          const Eigen::Matrix3d f =
              d.C[j] * (lam * Eigen::Matrix3d::Identity() + d.A[j]).inverse();
          b += d.area(e) * d.S.middleRows(3 * e, 3).transpose() * f *
               d.S.middleRows(3 * e, 3);
        }
      const Eigen::MatrixXd ours(schur_matrix(ops, lam, alpha));
      CHECK((ours - b).norm() <= 1e-12 * b.norm());
      CHECK((ours - ours.transpose()).norm() <= 1e-14 * b.norm());
    }
}

TEST_CASE("schur(alpha=+1) - schur(alpha=0) is the boundary mass") {
  const auto ops = make_ops(4);
  for (double lam : {0.1, 1.0, 10.0}) {
    const Eigen::MatrixXd diff(schur_matrix(ops, lam, 1) - schur_matrix(ops, lam, 0));
    const Eigen::MatrixXd mb = free_block(ops, ops.boundary_mass_N);
    CHECK((diff - mb).cwiseAbs().maxCoeff() <= 4 * std::numeric_limits<double>::epsilon() *
                                                   (lam + 10.0));
  }
}

TEST_CASE("state layout and H inner product") {
  const auto ops = make_ops(2);
  const RSState z = RSState::zero(ops);
  CHECK(z.v.size() == 2 * 9);
  CHECK(z.psi.size() == 8 * 2 * 3);
  const RSState s = smooth_state(ops);
  // Dirichlet nodes are zero.
  for (int i = 0; i < ops.num_nodes(); ++i)
    if (ops.dirichlet_mask[i])
      CHECK(s.v.segment<2>(2 * i).norm() == 0.0);
  const DenseModel d = dense_model(ops);
  const Eigen::VectorXd x = pack(d, s);
  Eigen::MatrixXd g = Eigen::MatrixXd::Zero(d.nf + d.np, d.nf + d.np);
  g.topLeftCorner(d.nf, d.nf) = d.M;
  for (int e = 0; e < ops.num_elements(); ++e)
    for (int j = 0; j < 2; ++j)
      g.block(d.nf + 3 * (2 * e + j), d.nf + 3 * (2 * e + j), 3, 3) = d.area(e) * d.C[j];
  CHECK(h_inner(ops, s, s) == doctest::Approx(x.dot(g * x)).epsilon(1e-13));
}

TEST_CASE("generator matches the dense oracle") {
  const auto ops = make_ops(2);
  const DenseModel d = dense_model(ops);
  const RSState s = smooth_state(ops, 1.7);
  for (int alpha : {-1, 0, 1}) {
    const Eigen::VectorXd want = dense_generator(d, alpha) * pack(d, s);
    CHECK(rel_diff(pack(d, apply_generator(ops, alpha, s)), want) <= 1e-12);
  }
}

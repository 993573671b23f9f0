// SPDX-License-Identifier: Apache-2.0
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>

#include "hdinfer/approx_inverse.hpp"

using namespace hdinfer;

namespace {

double max_abs_diag_deviation(const ApproximateInverse& minv,
                              const Eigen::MatrixXd& x) {
  double worst = 0.0;
  for (Eigen::Index j = 0; j < minv.p(); ++j) {
    worst = std::max(worst, std::abs(minv.m.row(j).dot(x.col(j)) - 1.0));
  }
  return worst;
}

}  // namespace

TEST_CASE("mpi_inverse on the identity design") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Identity(2, 2);
  ApproximateInverse minv = mpi_inverse(x);
  CHECK((minv.m - Eigen::MatrixXd::Identity(2, 2)).norm() <= 1e-12);
  CHECK(minv.d(0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(minv.d(1) == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("mpi_inverse on the rank-one design [1,1]") {
  Eigen::MatrixXd x(1, 2);
  x << 1, 1;
  ApproximateInverse minv = mpi_inverse(x);
  // X'(XX')^{-1} = (0.5, 0.5)', d = (2,2), M = (1,1)'.
  CHECK(minv.d(0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(minv.d(1) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(minv.m(0, 0) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(minv.m(1, 0) == doctest::Approx(1.0).epsilon(1e-12));
  Eigen::MatrixXd mx = minv.m * x;
  CHECK((mx - Eigen::MatrixXd::Ones(2, 2)).norm() <= 1e-12);
}

TEST_CASE("mpi unscaled map is a symmetric idempotent projector") {
  linalg::RngStream rng(31);
  Eigen::MatrixXd x = linalg::sample_gaussian_matrix(5, 10, rng);
  Eigen::MatrixXd proj = x.transpose() * linalg::spd_solve(x * x.transpose(), x);
  CHECK((proj - proj.transpose()).norm() <= 1e-9);
  CHECK((proj * proj - proj).norm() <= 1e-9);
}

TEST_CASE("diag(MX)=1 for every method on a random design") {
  linalg::RngStream rng(32);
  Eigen::MatrixXd x = linalg::sample_gaussian_matrix(12, 25, rng);
  CHECK(max_abs_diag_deviation(mpi_inverse(x), x) <= 1e-8);
  CHECK(max_abs_diag_deviation(ridge_inverse(x, 2.5), x) <= 1e-8);
  auto r1 = rng.child(1);
  CHECK(max_abs_diag_deviation(rls_inverse_ensemble(x, 8, 20, r1), x) <= 1e-8);
  auto r2 = rng.child(2);
  CHECK(max_abs_diag_deviation(rls_inverse_spectral(x, 8, 50, r2), x) <= 1e-8);
}

TEST_CASE("mpi errors: tall design, singular gram, degenerate column") {
  CHECK_THROWS_AS(mpi_inverse(Eigen::MatrixXd::Identity(3, 2)),
                  DimensionMismatch);
  Eigen::MatrixXd dup(2, 4);
  dup << 1, 2, 3, 4, 1, 2, 3, 4;  // duplicated rows
  CHECK_THROWS_AS(mpi_inverse(dup), SingularGram);
}

TEST_CASE("rls with k=n reproduces mpi on both paths") {
  linalg::RngStream rng(33);
  Eigen::MatrixXd x = linalg::sample_gaussian_matrix(8, 20, rng);
  ApproximateInverse mpi = mpi_inverse(x);
  auto r1 = rng.child(1);
  ApproximateInverse ens = rls_inverse_ensemble(x, 8, 1, r1);
  CHECK((ens.m - mpi.m).cwiseAbs().maxCoeff() <= 1e-8);
  auto r2 = rng.child(2);
  ApproximateInverse spec = rls_inverse_spectral(x, 8, 1, r2);
  CHECK((spec.m - mpi.m).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(spec.method == Method::RLS);
}

TEST_CASE("rls ensemble and spectral paths agree within Monte Carlo noise") {
  linalg::RngStream rng(34);
  Eigen::MatrixXd x = linalg::sample_gaussian_matrix(10, 30, rng);
  auto r1 = rng.child(1);
  ApproximateInverse ens = rls_inverse_ensemble(x, 9, 4000, r1);
  auto r2 = rng.child(2);
  ApproximateInverse spec = rls_inverse_spectral(x, 9, 4000, r2);
  // Both estimate the same expectation, but the ensemble terms are heavy
  // tailed: against a 2e5-draw reference the ensemble mean is ~3% off in
  // relative Frobenius norm, scaling as 1/sqrt(N), so ~20% is typical at
  // N=4000. 0.30 leaves Monte Carlo headroom.
  CHECK((ens.m - spec.m).norm() <= 0.30 * spec.m.norm());
}

TEST_CASE("rls input validation") {
  linalg::RngStream rng(35);
  Eigen::MatrixXd x = linalg::sample_gaussian_matrix(5, 9, rng);
  CHECK_THROWS_AS(rls_inverse_ensemble(x, 0, 10, rng), InvalidConstant);
  CHECK_THROWS_AS(rls_inverse_ensemble(x, 6, 10, rng), InvalidConstant);
  CHECK_THROWS_AS(rls_inverse_ensemble(x, 3, 0, rng), InvalidConstant);
  CHECK_THROWS_AS(rls_inverse_spectral(x, 3, 0, rng), InvalidConstant);
}

TEST_CASE("ridge_inverse on the orthonormal design cancels shrinkage") {
  ApproximateInverse minv = ridge_inverse(Eigen::MatrixXd::Identity(3, 3), 1.0);
  CHECK((minv.m - Eigen::MatrixXd::Identity(3, 3)).norm() <= 1e-12);
  CHECK((minv.d.array() - 2.0).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("ridge dual evaluation matches the primal p-by-p oracle") {
  linalg::RngStream rng(36);
  Eigen::MatrixXd x = linalg::sample_gaussian_matrix(5, 12, rng);
  const double gamma = 3.0;
  ApproximateInverse dual = ridge_inverse(x, gamma);

  Eigen::MatrixXd primal_gram =
      x.transpose() * x + gamma * Eigen::MatrixXd::Identity(12, 12);
  Eigen::MatrixXd primal = primal_gram.llt().solve(x.transpose());  // p x n
  for (Eigen::Index j = 0; j < 12; ++j) {
    Eigen::RowVectorXd unscaled = dual.unscaled_row(j);
    CHECK((unscaled - primal.row(j)).norm() <= 1e-10 * (1 + primal.row(j).norm()));
  }
}

TEST_CASE("ridge limit gamma->0 approaches the pseudoinverse map") {
  linalg::RngStream rng(37);
  Eigen::MatrixXd x = linalg::sample_gaussian_matrix(10, 30, rng);
  ApproximateInverse mpi = mpi_inverse(x);
  ApproximateInverse rid = ridge_inverse(x, 1e-8 * 30);
  CHECK((rid.m - mpi.m).norm() <= 1e-6 * mpi.m.norm());
}

TEST_CASE("ridge rejects non-positive gamma") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Identity(2, 2);
  CHECK_THROWS_AS(ridge_inverse(x, 0.0), NonPositiveGamma);
  CHECK_THROWS_AS(ridge_inverse(x, -1.0), NonPositiveGamma);
}

TEST_CASE("recommended_k matches hand-computed values and clamps") {
  // n=100, p=200: sqrt(log 200 / 100) ~ 0.2302; c_k ~ 0.4 gives ~0.908*(n-1).
  const int k = recommended_k(100, 200, 0.4);
  CHECK(k == 89);  // floor(0.90792*99)
  // Vanishing shrinkage: the floor lands one below n-1.
  CHECK(recommended_k(100, 200, 1e-9) == 98);
  CHECK(recommended_k(10, 10000, 0.9) == 1);
  CHECK_THROWS_AS(recommended_k(10, 10000, 2.0), InvalidConstant);
  CHECK_THROWS_AS(recommended_k(1, 10, 0.5), InvalidConstant);
}

TEST_CASE("recommended_gamma formula, limit, linearity") {
  // c chosen so the value is ~1 at n=100, p=200.
  const double g = recommended_gamma(100, 200, 0.0217);
  CHECK(g == doctest::Approx(1.0).epsilon(0.01));
  CHECK(recommended_gamma(100000000, 200, 1.0) <=
        1.0001e-3 * recommended_gamma(100, 200, 1.0));
  CHECK(recommended_gamma(100, 200, 2.0) ==
        doctest::Approx(2.0 * recommended_gamma(100, 200, 1.0))
            .epsilon(1e-12));
  CHECK_THROWS_AS(recommended_gamma(100, 200, 0.0), InvalidConstant);
}

TEST_CASE("omega_diagonal against full-matrix formation") {
  Eigen::MatrixXd x2 = Eigen::MatrixXd::Identity(2, 2);
  OmegaDiagonal omega2 = omega_diagonal(mpi_inverse(x2));
  CHECK(omega2.values(0) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(omega2.values(1) == doctest::Approx(2.0).epsilon(1e-12));

  Eigen::MatrixXd x1(1, 2);
  x1 << 1, 1;
  OmegaDiagonal omega1 = omega_diagonal(mpi_inverse(x1));
  CHECK(omega1.values(0) == doctest::Approx(1.0).epsilon(1e-12));

  linalg::RngStream rng(38);
  Eigen::MatrixXd x = linalg::sample_gaussian_matrix(4, 9, rng);
  ApproximateInverse minv = mpi_inverse(x);
  OmegaDiagonal omega = omega_diagonal(minv);
  Eigen::MatrixXd full = 4.0 * minv.m * minv.m.transpose();
  CHECK((omega.values - full.diagonal()).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(omega.values.minCoeff() > 0.0);

  // Omega is PSD: random probes of v'(nMM')v.
  for (int rep = 0; rep < 10; ++rep) {
    Eigen::VectorXd v = linalg::sample_gaussian_matrix(9, 1, rng);
    CHECK(v.dot(full * v) >= -1e-10);
  }
}

TEST_CASE("variance ordering under a shared diagonal scaling") {
  linalg::RngStream rng(39);
  Eigen::MatrixXd x = linalg::sample_gaussian_matrix(15, 40, rng);
  ApproximateInverse mpi = mpi_inverse(x);
  ApproximateInverse rid = ridge_inverse(x, 4.0);
  auto r1 = rng.child(1);
  ApproximateInverse rls = rls_inverse_spectral(x, 12, 2000, r1);

  const Eigen::VectorXd shared = mpi.d;
  Eigen::VectorXd w_mpi = omega_diagonal_shared(mpi, shared);
  Eigen::VectorXd w_rid = omega_diagonal_shared(rid, shared);
  Eigen::VectorXd w_rls = omega_diagonal_shared(rls, shared);

  Eigen::VectorXd sorted = w_mpi;
  std::sort(sorted.data(), sorted.data() + sorted.size());
  const double med = sorted(sorted.size() / 2);
  CHECK((w_rid - w_mpi).maxCoeff() <= 1e-12 * med);
  CHECK((w_rls - w_mpi).maxCoeff() <= 1e-3 * med);

  // Shared scaling with the inverse's own d reduces to omega_diagonal.
  CHECK((omega_diagonal_shared(mpi, mpi.d) - omega_diagonal(mpi).values)
            .cwiseAbs()
            .maxCoeff() <= 1e-12);
}

TEST_CASE("method name round trip") {
  for (Method m : {Method::MPI, Method::RLS, Method::RID}) {
    CHECK(method_from_name(method_name(m)) == m);
  }
  CHECK_THROWS_AS(method_from_name("nope"), ConfigError);
}

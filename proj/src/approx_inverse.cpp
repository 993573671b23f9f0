// SPDX-License-Identifier: Apache-2.0
#include "hdinfer/approx_inverse.hpp"

#include <cmath>

namespace hdinfer {

std::string method_name(Method m) {
  switch (m) {
    case Method::MPI: return "mpi";
    case Method::RLS: return "rls";
    case Method::RID: return "rid";
  }
  return "?";
}

Method method_from_name(const std::string& name) {
  if (name == "mpi" || name == "MPI") return Method::MPI;
  if (name == "rls" || name == "RLS") return Method::RLS;
  if (name == "rid" || name == "RID" || name == "ridge") return Method::RID;
  throw ConfigError("unknown method '" + name + "' (expected mpi|rls|rid)");
}

namespace {

// Applies the diagonal scaling of the approximate-inverse contract:
// d_j = (m̃_j'x_j)⁻¹ so that diag(M·X) = 1 exactly.
ApproximateInverse scale_rows(Eigen::MatrixXd m_tilde, const Eigen::MatrixXd& x,
                              Method method, Tuning tuning) {
  const Eigen::Index p = m_tilde.rows();
  Eigen::VectorXd d(p);
  for (Eigen::Index j = 0; j < p; ++j) {
    const double diag = m_tilde.row(j).dot(x.col(j));
    if (!(std::abs(diag) > 1e-12)) {
      throw DegenerateColumn("diagonal of M̃X vanishes at column " +
                             std::to_string(j));
    }
    d(j) = 1.0 / diag;
    m_tilde.row(j) *= d(j);
  }
  return ApproximateInverse{std::move(m_tilde), std::move(d), method, tuning};
}

linalg::SpdFactorization gram_cholesky(const Eigen::MatrixXd& x) {
  Eigen::MatrixXd gram = x * x.transpose();
  try {
    return linalg::cholesky(gram);
  } catch (const NotPositiveDefinite& e) {
    throw SingularGram(std::string("XX' is singular: ") + e.what());
  }
}

}  // namespace

ApproximateInverse mpi_inverse(const Eigen::MatrixXd& x) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (n > p) {
    throw DimensionMismatch("mpi_inverse expects a wide design (n <= p)");
  }
  const auto chol = gram_cholesky(x);
  // W = (XX')⁻¹X is n×p; M̃ = X'(XX')⁻¹ = W' by symmetry of the Gram matrix.
  Eigen::MatrixXd w = chol.solve(x);
  return scale_rows(w.transpose(), x, Method::MPI, Tuning{});
}

ApproximateInverse rls_inverse_ensemble(const Eigen::MatrixXd& x, int k,
                                        int ensemble_size,
                                        linalg::RngStream& rng) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (k < 1 || k > n) {
    throw InvalidConstant("rls ensemble: need 1 <= k <= n");
  }
  if (ensemble_size < 1) {
    throw InvalidConstant("rls ensemble: need ensemble_size >= 1");
  }
  if (k == n) {
    // The sketch expectation is exactly the pseudoinverse map (the
    // shrinkage matrix vanishes), so return the closed form instead of
    // averaging random right inverses toward it.
    ApproximateInverse out = mpi_inverse(x);
    out.method = Method::RLS;
    out.tuning.k = k;
    out.tuning.ensemble_size = ensemble_size;
    return out;
  }
  gram_cholesky(x);  // reject singular designs up front

  Eigen::MatrixXd sum = Eigen::MatrixXd::Zero(p, n);
  const long max_rejections = 10L * ensemble_size;
  long rejections = 0;
  for (int r = 0; r < ensemble_size;) {
    Eigen::MatrixXd sketch = linalg::sample_gaussian_matrix(p, k, rng);
    Eigen::MatrixXd xr = x * sketch;                       // n x k
    Eigen::MatrixXd small_gram = xr.transpose() * xr;      // k x k
    linalg::SpdFactorization chol;
    try {
      chol = linalg::cholesky(small_gram);
    } catch (const NotPositiveDefinite&) {
      if (++rejections > max_rejections) {
        throw SingularSketch("too many singular sketch draws");
      }
      continue;
    }
    // term = R (R'X'XR)⁻¹ R'X'
    Eigen::MatrixXd solved = chol.solve(xr.transpose());   // k x n
    sum.noalias() += sketch * solved;
    ++r;
  }
  Eigen::MatrixXd m_tilde = sum / static_cast<double>(ensemble_size);
  Tuning tuning;
  tuning.k = k;
  tuning.ensemble_size = ensemble_size;
  return scale_rows(std::move(m_tilde), x, Method::RLS, tuning);
}

ApproximateInverse rls_inverse_spectral(const Eigen::MatrixXd& x, int k,
                                        int v_samples,
                                        linalg::RngStream& rng) {
  const Eigen::Index n = x.rows();
  if (k < 1 || k > n) {
    throw InvalidConstant("rls spectral: need 1 <= k <= n");
  }
  if (k == n) {
    // The shrinkage matrix V has no columns; the map is exactly MPI.
    ApproximateInverse out = mpi_inverse(x);
    out.method = Method::RLS;
    out.tuning.k = k;
    return out;
  }
  if (v_samples < 1) {
    throw InvalidConstant("rls spectral: need v_samples >= 1");
  }

  Eigen::MatrixXd gram = x * x.transpose();
  linalg::SymEig eig;
  try {
    eig = linalg::sym_eig(gram);
  } catch (const NoConvergence& e) {
    throw SingularGram(std::string("eigendecomposition failed: ") + e.what());
  }
  const double lambda_max = eig.eigenvalues(0);
  if (!(lambda_max > 0.0) ||
      eig.eigenvalues(n - 1) <= 1e-10 * lambda_max) {
    throw SingularGram("XX' has (near-)zero eigenvalues");
  }
  const Eigen::VectorXd lambda = eig.eigenvalues;
  const Eigen::VectorXd inv_lambda = lambda.cwiseInverse();

  // Estimate the diagonal shrinkage V_ii = E[(Ξ(Ξ'Λ⁻¹Ξ)⁻¹Ξ'Λ⁻¹)_ii] by Monte
  // Carlo over Gaussian n×(n−k) draws. Off-diagonal entries are zero in
  // expectation and are never formed.
  const Eigen::Index m_cols = n - k;
  Eigen::VectorXd v_diag = Eigen::VectorXd::Zero(n);
  long rejections = 0;
  const long max_rejections = 10L * v_samples;
  for (int s = 0; s < v_samples;) {
    Eigen::MatrixXd xi = linalg::sample_gaussian_matrix(n, m_cols, rng);
    Eigen::MatrixXd core =
        xi.transpose() * inv_lambda.asDiagonal() * xi;  // (n-k)x(n-k)
    linalg::SpdFactorization chol;
    try {
      chol = linalg::cholesky(core);
    } catch (const NotPositiveDefinite&) {
      if (++rejections > max_rejections) {
        throw SingularSketch("too many singular shrinkage draws");
      }
      continue;
    }
    Eigen::MatrixXd solved = chol.solve(xi.transpose());  // (n-k) x n
    for (Eigen::Index i = 0; i < n; ++i) {
      v_diag(i) += xi.row(i).dot(solved.col(i)) * inv_lambda(i);
    }
    ++s;
  }
  v_diag /= static_cast<double>(v_samples);

  // M̃ = Û_n (I−V) Λ^{-1/2} V̂'  with  Û_n = X'V̂Λ^{-1/2}.
  const Eigen::VectorXd inv_sqrt_lambda = lambda.cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd u_n =
      x.transpose() * eig.eigenvectors * inv_sqrt_lambda.asDiagonal();
  Eigen::VectorXd middle =
      (Eigen::VectorXd::Ones(n) - v_diag).cwiseProduct(inv_sqrt_lambda);
  Eigen::MatrixXd m_tilde =
      u_n * middle.asDiagonal() * eig.eigenvectors.transpose();

  Tuning tuning;
  tuning.k = k;
  tuning.ensemble_size = v_samples;
  return scale_rows(std::move(m_tilde), x, Method::RLS, tuning);
}

ApproximateInverse ridge_inverse(const Eigen::MatrixXd& x, double gamma) {
  if (!(gamma > 0.0)) {
    throw NonPositiveGamma("ridge penalty must be positive");
  }
  const Eigen::Index n = x.rows();
  Eigen::MatrixXd shifted = x * x.transpose();
  shifted.diagonal().array() += gamma;
  linalg::SpdFactorization chol;
  try {
    chol = linalg::cholesky(shifted);
  } catch (const NotPositiveDefinite& e) {
    throw SingularGram(std::string("XX' + gamma*I not PD: ") + e.what());
  }
  Eigen::MatrixXd w = chol.solve(x);  // (XX'+γI)⁻¹X, n×p
  Tuning tuning;
  tuning.gamma = gamma;
  return scale_rows(w.transpose(), x, Method::RID, tuning);
}

int recommended_k(int n, int p, double c_k) {
  if (n <= 1 || p <= 1 || !(c_k > 0.0)) {
    throw InvalidConstant("recommended_k: need n > 1, p > 1, c_k > 0");
  }
  const double shrink = c_k * std::sqrt(std::log(static_cast<double>(p)) /
                                        static_cast<double>(n));
  if (shrink >= 1.0) {
    throw InvalidConstant("recommended_k: c_k*sqrt(log p / n) must be < 1");
  }
  int k = static_cast<int>(std::floor((1.0 - shrink) * (n - 1)));
  return std::clamp(k, 1, n - 1);
}

double recommended_gamma(int n, int p, double c_gamma) {
  if (!(c_gamma > 0.0)) {
    throw InvalidConstant("recommended_gamma: need c_gamma > 0");
  }
  return c_gamma * static_cast<double>(p) *
         std::sqrt(std::log(static_cast<double>(p)) / static_cast<double>(n));
}

OmegaDiagonal omega_diagonal(const ApproximateInverse& minv) {
  const double n = static_cast<double>(minv.n());
  Eigen::VectorXd values = n * minv.m.rowwise().squaredNorm();
  return OmegaDiagonal{std::move(values), minv.method};
}

Eigen::VectorXd omega_diagonal_shared(const ApproximateInverse& minv,
                                      const Eigen::VectorXd& shared_d) {
  if (shared_d.size() != minv.p()) {
    throw DimensionMismatch("shared scaling has wrong length");
  }
  const double n = static_cast<double>(minv.n());
  Eigen::VectorXd out(minv.p());
  for (Eigen::Index j = 0; j < minv.p(); ++j) {
    const double scale = shared_d(j) / minv.d(j);
    out(j) = n * scale * scale * minv.m.row(j).squaredNorm();
  }
  return out;
}

}  // namespace hdinfer

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>

#include "hdinfer/linalg.hpp"

namespace hdinfer {

enum class Method { MPI, RLS, RID };

std::string method_name(Method m);
Method method_from_name(const std::string& name);

struct Tuning {
  std::optional<int> k;              // RLS projection dimension
  std::optional<int> ensemble_size;  // RLS ensemble draws
  std::optional<double> gamma;       // ridge penalty
};

/// A diagonally scaled approximate inverse M = D·M̃ of the design matrix,
/// with diag(M·X) = 1 by construction. Immutable after construction.
struct ApproximateInverse {
  Eigen::MatrixXd m;  // p x n, already scaled by d
  Eigen::VectorXd d;  // length p, the diagonal of D
  Method method = Method::MPI;
  Tuning tuning;

  Eigen::Index p() const { return m.rows(); }
  Eigen::Index n() const { return m.cols(); }

  /// Row j of the unscaled map M̃ (i.e. row j of M divided by d_j).
  Eigen::RowVectorXd unscaled_row(Eigen::Index j) const {
    return m.row(j) / d(j);
  }
};

struct OmegaDiagonal {
  Eigen::VectorXd values;  // Omega_jj = n * ||m_j||^2
  Method method = Method::MPI;
};

/// Scaled Moore-Penrose pseudoinverse M = D·X'(XX')⁻¹ with
/// d_j = [x_j'(XX')⁻¹x_j]⁻¹. Requires n <= p and a nonsingular row Gram
/// matrix.
ApproximateInverse mpi_inverse(const Eigen::MatrixXd& x);

/// Random least squares approximate inverse, averaging
/// R(R'X'XR)⁻¹R'X' over `ensemble_size` independent Gaussian p×k sketches
/// and then applying the diagonal scaling. Singular sketches are rejected
/// and redrawn, up to 10·ensemble_size rejections.
ApproximateInverse rls_inverse_ensemble(const Eigen::MatrixXd& x, int k,
                                        int ensemble_size,
                                        linalg::RngStream& rng);

/// Random least squares through the spectral identity: the sketch
/// expectation applied to X'X equals Û(I−V)Û' with V diagonal, so only the
/// diagonal shrinkage factors V_ii need Monte Carlo estimation. Each V_ii
/// sample lies in [0,1). k = n is handled as exact MPI.
ApproximateInverse rls_inverse_spectral(const Eigen::MatrixXd& x, int k,
                                        int v_samples,
                                        linalg::RngStream& rng);

/// Ridge approximate inverse M = D·(X'X+γI)⁻¹X', evaluated through the dual
/// identity (X'X+γI)⁻¹X' = X'(XX'+γI)⁻¹ so only n×n systems are solved.
ApproximateInverse ridge_inverse(const Eigen::MatrixXd& x, double gamma);

/// Projection dimension k = floor((1 − c_k·sqrt(log p / n))·(n−1)),
/// clamped to [1, n−1].
int recommended_k(int n, int p, double c_k);

/// Ridge penalty gamma = c_gamma · p · sqrt(log p / n).
double recommended_gamma(int n, int p, double c_gamma);

/// Diagonal of the estimator covariance Omega = n·M·M'.
OmegaDiagonal omega_diagonal(const ApproximateInverse& minv);

/// Omega diagonal recomputed under a caller-supplied shared scaling D
/// (replaces the inverse's own d row by row). Used for variance-ordering
/// comparisons that require a common D.
Eigen::VectorXd omega_diagonal_shared(const ApproximateInverse& minv,
                                      const Eigen::VectorXd& shared_d);

}  // namespace hdinfer

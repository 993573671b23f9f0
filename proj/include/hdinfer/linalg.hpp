// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "hdinfer/errors.hpp"

namespace hdinfer::linalg {

/// Cholesky factorization A = L·Lᵀ of a symmetric positive-definite matrix.
/// The factor has strictly positive diagonal entries.
struct SpdFactorization {
  Eigen::MatrixXd factor;  // lower triangular

  Eigen::Index dimension() const { return factor.rows(); }

  /// Solves A·X = B through the two triangular systems.
  Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const;

  /// log det A = 2·Σ log L_ii.
  double log_determinant() const;
};

/// Factorizes a symmetric positive-definite matrix. Throws NotPositiveDefinite
/// when a pivot falls below n·eps·max|diag|, NotSymmetric when the input is
/// asymmetric beyond 1e-10 relative.
SpdFactorization cholesky(const Eigen::MatrixXd& a);

/// Solves A·X = B for symmetric positive-definite A.
Eigen::MatrixXd spd_solve(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b);

/// Eigendecomposition of a symmetric matrix, eigenvalues sorted descending,
/// eigenvector columns aligned with eigenvalues.
struct SymEig {
  Eigen::VectorXd eigenvalues;
  Eigen::MatrixXd eigenvectors;
};

/// Cyclic Jacobi eigensolver. Deterministic; throws NoConvergence beyond the
/// sweep limit.
SymEig sym_eig(const Eigen::MatrixXd& a, int max_sweeps = 100);

/// Standard normal CDF.
double std_normal_cdf(double z);

/// Inverse standard normal CDF, absolute error below 1e-9. Throws OutOfDomain
/// for q outside (0,1).
double std_normal_quantile(double q);

/// Deterministic random stream identified by (seed, stream id). The same pair
/// always reproduces the same sequence; child streams are independent and
/// derived purely from the ids, so parallel use is reproducible regardless of
/// scheduling. Value-semantic; do not share one instance mutably across
/// threads.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed, std::uint64_t stream_id = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t stream_id() const { return stream_id_; }

  /// Derives an independent child stream. Distinct indices give distinct
  /// streams; the child depends only on (seed, stream id, index).
  RngStream child(std::uint64_t index) const;

  std::uint64_t next_u64();

  /// Uniform in [0, 1).
  double next_uniform();

  /// Standard normal via Box-Muller on the stream's own uniforms (no
  /// implementation-defined std distributions, so sequences are portable).
  double next_gaussian();

  /// Uniform integer in [0, bound), rejection-sampled to remove modulo bias.
  std::uint64_t next_below(std::uint64_t bound);

 private:
  std::uint64_t seed_;
  std::uint64_t stream_id_;
  std::uint64_t state_;  // splitmix64 state
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Matrix with i.i.d. standard normal entries, filled in column-major order.
Eigen::MatrixXd sample_gaussian_matrix(Eigen::Index rows, Eigen::Index cols,
                                       RngStream& rng);

/// k distinct indices drawn uniformly from {0,...,n-1} (partial
/// Fisher-Yates); returned in draw order.
std::vector<Eigen::Index> sample_without_replacement(Eigen::Index n,
                                                     Eigen::Index k,
                                                     RngStream& rng);

/// In-place Fisher-Yates shuffle.
template <typename T>
void shuffle(std::vector<T>& v, RngStream& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    std::swap(v[i - 1], v[rng.next_below(i)]);
  }
}

}  // namespace hdinfer::linalg

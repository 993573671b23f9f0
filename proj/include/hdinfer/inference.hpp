// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <optional>
#include <vector>

#include "hdinfer/approx_inverse.hpp"

namespace hdinfer::inference {

/// Bias-corrected estimates with per-coefficient normal confidence
/// intervals: beta_c[j] ± z_{alpha/2}·sigma·sqrt(omega_jj[j]/n).
struct DebiasedFit {
  Eigen::VectorXd beta_c;
  Eigen::VectorXd omega_jj;
  double sigma2 = 0.0;
  double alpha = 0.05;
  Eigen::VectorXd ci_lower;
  Eigen::VectorXd ci_upper;
  Method method = Method::MPI;

  Eigen::VectorXd standard_errors(int n) const {
    return (sigma2 * omega_jj / static_cast<double>(n)).cwiseSqrt();
  }
};

/// Empirical pieces of the bias bound ||Delta||_inf <=
/// sqrt(n)·||MX−I||_max·||beta−beta_init||_1.
struct BiasDiagnostic {
  double max_offdiag = 0.0;
  std::optional<double> l1_init_error;
  std::optional<double> bound_product;
};

/// Correction estimator beta_c = My − (MX − I)·beta_init, evaluated as
/// M(y − X·beta_init) + beta_init so the p×p product MX is never formed.
Eigen::VectorXd debias(const ApproximateInverse& minv, const Eigen::MatrixXd& x,
                       const Eigen::VectorXd& y,
                       const Eigen::VectorXd& beta_init);

DebiasedFit confidence_intervals(const Eigen::VectorXd& beta_c,
                                 const Eigen::VectorXd& omega_jj,
                                 double sigma2, int n, double alpha,
                                 Method method = Method::MPI);

/// Streams over columns of X; MX is never materialized.
BiasDiagnostic bias_diagnostic(const ApproximateInverse& minv,
                               const Eigen::MatrixXd& x,
                               const Eigen::VectorXd& beta_init,
                               const Eigen::VectorXd* beta_true = nullptr);

struct PartialledOut {
  Eigen::MatrixXd x;
  Eigen::VectorXd y;
  int effective_n = 0;  // n − q, to be used downstream wherever n appears
};

/// Frisch-Waugh partialling-out: residualizes X and y on the controls Z via
/// a QR-based projector. Throws RankDeficientControls if Z is not full
/// column rank.
PartialledOut partial_out(const Eigen::MatrixXd& z, const Eigen::MatrixXd& x,
                          const Eigen::VectorXd& y);

/// Indices whose confidence interval excludes zero.
std::vector<int> significant_set(const DebiasedFit& fit);

}  // namespace hdinfer::inference

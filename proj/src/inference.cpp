// SPDX-License-Identifier: Apache-2.0
#include "hdinfer/inference.hpp"

#include <cmath>

namespace hdinfer::inference {

Eigen::VectorXd debias(const ApproximateInverse& minv, const Eigen::MatrixXd& x,
                       const Eigen::VectorXd& y,
                       const Eigen::VectorXd& beta_init) {
  if (x.rows() != minv.n() || x.cols() != minv.p() ||
      y.size() != x.rows() || beta_init.size() != x.cols()) {
    throw DimensionMismatch("debias: inconsistent dimensions");
  }
  // My − (MX−I)b = M(y − Xb) + b, an O(np) path.
  return minv.m * (y - x * beta_init) + beta_init;
}

DebiasedFit confidence_intervals(const Eigen::VectorXd& beta_c,
                                 const Eigen::VectorXd& omega_jj,
                                 double sigma2, int n, double alpha,
                                 Method method) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw InvalidAlpha("alpha must lie in (0,1)");
  }
  if (!(sigma2 > 0.0)) {
    throw OutOfDomain("confidence_intervals: sigma2 must be positive");
  }
  if (beta_c.size() != omega_jj.size()) {
    throw DimensionMismatch("confidence_intervals: length mismatch");
  }
  const double z = linalg::std_normal_quantile(1.0 - alpha / 2.0);
  Eigen::VectorXd half_width =
      z * (sigma2 * omega_jj / static_cast<double>(n)).cwiseSqrt();

  DebiasedFit fit;
  fit.beta_c = beta_c;
  fit.omega_jj = omega_jj;
  fit.sigma2 = sigma2;
  fit.alpha = alpha;
  fit.ci_lower = beta_c - half_width;
  fit.ci_upper = beta_c + half_width;
  fit.method = method;
  return fit;
}

BiasDiagnostic bias_diagnostic(const ApproximateInverse& minv,
                               const Eigen::MatrixXd& x,
                               const Eigen::VectorXd& beta_init,
                               const Eigen::VectorXd* beta_true) {
  const Eigen::Index p = minv.p();
  double max_offdiag = 0.0;
  for (Eigen::Index j = 0; j < p; ++j) {
    Eigen::VectorXd col = minv.m * x.col(j);  // column j of MX
    for (Eigen::Index i = 0; i < p; ++i) {
      if (i == j) continue;
      max_offdiag = std::max(max_offdiag, std::abs(col(i)));
    }
  }

  BiasDiagnostic diag;
  diag.max_offdiag = max_offdiag;
  if (beta_true != nullptr) {
    const double l1 = (*beta_true - beta_init).lpNorm<1>();
    diag.l1_init_error = l1;
    diag.bound_product =
        std::sqrt(static_cast<double>(minv.n())) * max_offdiag * l1;
  }
  return diag;
}

PartialledOut partial_out(const Eigen::MatrixXd& z, const Eigen::MatrixXd& x,
                          const Eigen::VectorXd& y) {
  const Eigen::Index n = z.rows();
  const Eigen::Index q = z.cols();
  if (x.rows() != n || y.size() != n) {
    throw DimensionMismatch("partial_out: row counts differ");
  }
  if (q >= n) {
    throw RankDeficientControls("partial_out: need q < n");
  }

  Eigen::HouseholderQR<Eigen::MatrixXd> qr(z);
  Eigen::MatrixXd r = qr.matrixQR().topRows(q).triangularView<Eigen::Upper>();
  const double r_max = r.diagonal().cwiseAbs().maxCoeff();
  if (r.diagonal().cwiseAbs().minCoeff() <=
      static_cast<double>(n) * 1e-12 * std::max(r_max, 1.0)) {
    throw RankDeficientControls("controls are rank deficient");
  }

  Eigen::MatrixXd q_thin =
      qr.householderQ() * Eigen::MatrixXd::Identity(n, q);

  PartialledOut out;
  out.x = x - q_thin * (q_thin.transpose() * x);
  out.y = y - q_thin * (q_thin.transpose() * y);
  out.effective_n = static_cast<int>(n - q);
  return out;
}

std::vector<int> significant_set(const DebiasedFit& fit) {
  std::vector<int> out;
  for (Eigen::Index j = 0; j < fit.beta_c.size(); ++j) {
    if (fit.ci_lower(j) > 0.0 || fit.ci_upper(j) < 0.0) {
      out.push_back(static_cast<int>(j));
    }
  }
  return out;
}

}  // namespace hdinfer::inference

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include "hdinfer/linalg.hpp"

namespace hdinfer::lasso {

/// Result of an l1-penalized least squares fit of
///   (1/n)||y - Xb||^2 + lambda*||b||_1.
/// Support counting uses exact zeros (coordinate descent produces them).
struct LassoFit {
  Eigen::VectorXd beta;
  double lambda = 0.0;
  int support_size = 0;
  Eigen::VectorXd residuals;
  double objective = 0.0;
};

/// Smallest penalty at which the solution is identically zero:
/// max_j |(2/n) x_j'y|.
double lambda_max(const Eigen::MatrixXd& x, const Eigen::VectorXd& y);

/// Theoretical penalty floor 8*sigma*sqrt(log p / n). The experiments use
/// cross-validation instead; this is exposed for callers who know sigma.
double theoretical_lambda(double sigma, int n, int p);

/// Cyclic coordinate descent. Converged when the largest coefficient change
/// in a sweep is <= tol*(1+||beta||_inf). Throws NoConvergence past
/// max_sweeps and ZeroColumn for an identically zero column.
LassoFit lasso_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                   double lambda,
                   const Eigen::VectorXd* warm_start = nullptr,
                   int max_sweeps = 1000000, double tol = 1e-8);

struct CvLassoResult {
  double lambda_star = 0.0;
  LassoFit fit;                // full-data refit at lambda_star
  Eigen::VectorXd lambda_grid;  // descending
  Eigen::VectorXd cv_mse;      // mean held-out squared error per grid point
};

/// K-fold cross-validation over a log-spaced grid from lambda_max down to
/// 1e-3*lambda_max. Folds are contiguous blocks of a seeded shuffle; ties in
/// the CV error break toward the smaller lambda.
CvLassoResult cv_lasso(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                       int folds, int grid_size, linalg::RngStream& rng);

/// Noise-level estimate sigma^2 = eps'eps / (n - s_hat). Throws
/// DegreesOfFreedomExhausted when the support is as large as n.
double noise_level(const LassoFit& fit, int n);

}  // namespace hdinfer::lasso

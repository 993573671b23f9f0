// SPDX-License-Identifier: Apache-2.0
#include "hdinfer/lasso.hpp"

#include <cmath>
#include <numeric>
#include <vector>

namespace hdinfer::lasso {

namespace {

double soft_threshold(double z, double t) {
  if (z > t) return z - t;
  if (z < -t) return z + t;
  return 0.0;
}

double objective_value(const Eigen::VectorXd& residuals,
                       const Eigen::VectorXd& beta, double lambda,
                       Eigen::Index n) {
  return residuals.squaredNorm() / static_cast<double>(n) +
         lambda * beta.lpNorm<1>();
}

// Primal active-set step: starting from the signed support of beta, solve
// the equality-constrained stationarity system
//   (X'X)_AA b_A = (X'y)_A - thresh * signs_A,
// line-search to the first sign crossing when the solution leaves the
// current orthant (dropping the crossing coordinate), and add the most
// violating inactive coordinate when the subgradient bound fails. Strict
// objective descent makes the sign patterns non-repeating, so the loop
// terminates; the caller still re-verifies convergence with coordinate
// descent, so returning false (give up) is always safe.
bool active_set_solve(const Eigen::MatrixXd& gram, const Eigen::VectorXd& xty,
                      double thresh, Eigen::VectorXd& beta) {
  const Eigen::Index p = gram.rows();
  const int max_updates = static_cast<int>(10 * p + 100);

  std::vector<Eigen::Index> active;
  std::vector<double> signs;
  for (Eigen::Index j = 0; j < p; ++j) {
    if (beta(j) != 0.0) {
      active.push_back(j);
      signs.push_back(beta(j) > 0.0 ? 1.0 : -1.0);
    }
  }

  for (int it = 0; it < max_updates; ++it) {
    const Eigen::Index a = static_cast<Eigen::Index>(active.size());
    Eigen::VectorXd b(a);
    if (a > 0) {
      Eigen::MatrixXd ga(a, a);
      Eigen::VectorXd rhs(a);
      for (Eigen::Index i = 0; i < a; ++i) {
        for (Eigen::Index l = 0; l < a; ++l) {
          ga(i, l) = gram(active[static_cast<std::size_t>(i)],
                          active[static_cast<std::size_t>(l)]);
        }
        rhs(i) = xty(active[static_cast<std::size_t>(i)]) -
                 thresh * signs[static_cast<std::size_t>(i)];
      }
      try {
        b = linalg::spd_solve(ga, rhs);
      } catch (const NotPositiveDefinite&) {
        return false;
      }
    }

    bool consistent = true;
    for (Eigen::Index i = 0; i < a; ++i) {
      if (b(i) * signs[static_cast<std::size_t>(i)] <= 0.0) {
        consistent = false;
        break;
      }
    }

    if (!consistent) {
      // Step toward b until the first coordinate hits zero, then drop it.
      double t = 1.0;
      Eigen::Index cross = -1;
      for (Eigen::Index i = 0; i < a; ++i) {
        if (b(i) * signs[static_cast<std::size_t>(i)] > 0.0) continue;
        const double cur = beta(active[static_cast<std::size_t>(i)]);
        const double ti = cur / (cur - b(i));
        if (ti < t) {
          t = ti;
          cross = i;
        }
      }
      if (cross < 0 || !(t > 0.0)) return false;  // no progress possible
      for (Eigen::Index i = 0; i < a; ++i) {
        double& cur = beta(active[static_cast<std::size_t>(i)]);
        cur += t * (b(i) - cur);
      }
      beta(active[static_cast<std::size_t>(cross)]) = 0.0;
      std::vector<Eigen::Index> next_active;
      std::vector<double> next_signs;
      for (Eigen::Index i = 0; i < a; ++i) {
        const double v = beta(active[static_cast<std::size_t>(i)]);
        if (v * signs[static_cast<std::size_t>(i)] > 0.0) {
          next_active.push_back(active[static_cast<std::size_t>(i)]);
          next_signs.push_back(signs[static_cast<std::size_t>(i)]);
        } else {
          beta(active[static_cast<std::size_t>(i)]) = 0.0;
        }
      }
      active = std::move(next_active);
      signs = std::move(next_signs);
      continue;
    }

    for (Eigen::Index i = 0; i < a; ++i) {
      beta(active[static_cast<std::size_t>(i)]) = b(i);
    }
    // Subgradient bound on the inactive coordinates via the Gram matrix.
    Eigen::VectorXd corr = xty;
    for (Eigen::Index i = 0; i < a; ++i) {
      corr.noalias() -= b(i) * gram.col(active[static_cast<std::size_t>(i)]);
    }
    Eigen::Index worst = -1;
    double worst_abs = thresh * (1.0 + 1e-9);
    for (Eigen::Index j = 0; j < p; ++j) {
      if (beta(j) != 0.0) continue;
      const double c = std::abs(corr(j));
      if (c > worst_abs) {
        worst_abs = c;
        worst = j;
      }
    }
    if (worst < 0) return true;
    active.push_back(worst);
    signs.push_back(corr(worst) > 0.0 ? 1.0 : -1.0);
  }
  return false;
}

// Shared implementation: cyclic coordinate descent with an active-set jump
// once plain sweeps have not converged. Callers fitting many penalties on
// the same data can pass a precomputed Gram matrix X'X and moments X'y.
LassoFit fit_impl(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                  double lambda, const Eigen::VectorXd* warm_start,
                  int max_sweeps, double tol, const Eigen::MatrixXd* gram_in,
                  const Eigen::VectorXd* xty_in) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (y.size() != n) {
    throw DimensionMismatch("lasso_fit: y length != rows of X");
  }
  if (!(lambda > 0.0)) {
    throw OutOfDomain("lasso_fit: lambda must be positive");
  }

  Eigen::VectorXd col_sq = x.colwise().squaredNorm();
  for (Eigen::Index j = 0; j < p; ++j) {
    if (col_sq(j) <= 0.0) {
      throw ZeroColumn("column " + std::to_string(j) + " is identically zero");
    }
  }

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  if (warm_start != nullptr) {
    if (warm_start->size() != p) {
      throw DimensionMismatch("lasso_fit: warm start has wrong length");
    }
    beta = *warm_start;
  }
  Eigen::VectorXd residuals = y - x * beta;

  // Under the (1/n)||.||^2 scaling the per-coordinate threshold is n*lambda/2
  // on x_j'r, equivalently lambda/2 after dividing by the column norm.
  const double thresh = static_cast<double>(n) * lambda / 2.0;

  Eigen::MatrixXd gram_local;
  Eigen::VectorXd xty_local;
  bool moments_ready = gram_in != nullptr && xty_in != nullptr;

  bool converged = false;
  int sweeps_since_jump = 0;
  int jump_interval = 4;  // back off when a jump fails to certify
  for (int sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    double max_change = 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
      const double old = beta(j);
      double rho = x.col(j).dot(residuals);
      if (old != 0.0) rho += col_sq(j) * old;
      const double updated = soft_threshold(rho, thresh) / col_sq(j);
      if (updated != old) {
        residuals.noalias() -= (updated - old) * x.col(j);
        beta(j) = updated;
        max_change = std::max(max_change, std::abs(updated - old));
      }
    }
    converged = max_change <= tol * (1.0 + beta.cwiseAbs().maxCoeff());
    if (converged) break;

    if (++sweeps_since_jump >= jump_interval) {
      if (!moments_ready) {
        gram_local = x.transpose() * x;
        xty_local = x.transpose() * y;
        moments_ready = true;
      }
      const Eigen::MatrixXd& gram = gram_in != nullptr ? *gram_in : gram_local;
      const Eigen::VectorXd& xty = xty_in != nullptr ? *xty_in : xty_local;
      Eigen::VectorXd candidate = beta;
      if (active_set_solve(gram, xty, thresh, candidate)) {
        // Adopt the jump; the next sweep re-verifies the convergence
        // criterion from actual residuals before we report success.
        beta = std::move(candidate);
        residuals = y - x * beta;
        sweeps_since_jump = 0;
        jump_interval = 4;
      } else {
        sweeps_since_jump = 0;
        jump_interval = std::min(jump_interval * 4, 1024);
      }
    }
  }
  if (!converged) {
    throw NoConvergence("lasso_fit: coordinate descent did not converge");
  }

  LassoFit fit;
  fit.beta = std::move(beta);
  fit.lambda = lambda;
  fit.support_size =
      static_cast<int>((fit.beta.array() != 0.0).count());
  fit.objective = objective_value(residuals, fit.beta, lambda, n);
  fit.residuals = std::move(residuals);
  return fit;
}

}  // namespace

double lambda_max(const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  const double n = static_cast<double>(x.rows());
  return (2.0 / n) * (x.transpose() * y).cwiseAbs().maxCoeff();
}

double theoretical_lambda(double sigma, int n, int p) {
  return 8.0 * sigma *
         std::sqrt(std::log(static_cast<double>(p)) / static_cast<double>(n));
}

LassoFit lasso_fit(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                   double lambda, const Eigen::VectorXd* warm_start,
                   int max_sweeps, double tol) {
  return fit_impl(x, y, lambda, warm_start, max_sweeps, tol, nullptr, nullptr);
}

CvLassoResult cv_lasso(const Eigen::MatrixXd& x, const Eigen::VectorXd& y,
                       int folds, int grid_size, linalg::RngStream& rng) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (folds < 2) {
    throw OutOfDomain("cv_lasso: need folds >= 2");
  }
  if (n < folds) {
    throw OutOfDomain("cv_lasso: need n >= folds");
  }
  if (grid_size < 1) {
    throw OutOfDomain("cv_lasso: need grid_size >= 1");
  }

  const double lam_hi = lambda_max(x, y);
  const double lam_lo = 1e-3 * lam_hi;
  Eigen::VectorXd grid(grid_size);
  if (grid_size == 1) {
    grid(0) = lam_hi;
  } else {
    const double step =
        (std::log(lam_hi) - std::log(lam_lo)) / (grid_size - 1);
    for (int g = 0; g < grid_size; ++g) {
      grid(g) = std::exp(std::log(lam_hi) - g * step);
    }
  }

  // Contiguous fold blocks over a seeded shuffle of the row indices.
  std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Eigen::Index{0});
  linalg::shuffle(perm, rng);

  Eigen::VectorXd cv_sse = Eigen::VectorXd::Zero(grid_size);
  for (int f = 0; f < folds; ++f) {
    const Eigen::Index lo = n * f / folds;
    const Eigen::Index hi = n * (f + 1) / folds;
    const Eigen::Index n_test = hi - lo;
    const Eigen::Index n_train = n - n_test;

    Eigen::MatrixXd x_train(n_train, p), x_test(n_test, p);
    Eigen::VectorXd y_train(n_train), y_test(n_test);
    Eigen::Index it = 0, iv = 0;
    for (Eigen::Index r = 0; r < n; ++r) {
      const Eigen::Index row = perm[static_cast<std::size_t>(r)];
      if (r >= lo && r < hi) {
        x_test.row(iv) = x.row(row);
        y_test(iv++) = y(row);
      } else {
        x_train.row(it) = x.row(row);
        y_train(it++) = y(row);
      }
    }

    // Warm-started path from the largest penalty down, with the fold's
    // Gram matrix computed once and shared across the whole grid.
    Eigen::MatrixXd gram = x_train.transpose() * x_train;
    Eigen::VectorXd xty = x_train.transpose() * y_train;
    Eigen::VectorXd warm = Eigen::VectorXd::Zero(p);
    for (int g = 0; g < grid_size; ++g) {
      LassoFit fit = fit_impl(x_train, y_train, grid(g), &warm, 1000000,
                              1e-8, &gram, &xty);
      warm = fit.beta;
      cv_sse(g) += (y_test - x_test * fit.beta).squaredNorm();
    }
  }
  Eigen::VectorXd cv_mse = cv_sse / static_cast<double>(n);

  // Grid is descending, so scanning forward and keeping <= picks the
  // smallest lambda among ties.
  int best = 0;
  for (int g = 1; g < grid_size; ++g) {
    if (cv_mse(g) <= cv_mse(best)) best = g;
  }

  CvLassoResult out;
  out.lambda_star = grid(best);
  out.lambda_grid = std::move(grid);
  out.cv_mse = std::move(cv_mse);
  out.fit = lasso_fit(x, y, out.lambda_star);
  return out;
}

double noise_level(const LassoFit& fit, int n) {
  const int dof = n - fit.support_size;
  if (dof < 1) {
    throw DegreesOfFreedomExhausted(
        "noise_level: lasso support as large as the sample");
  }
  return fit.residuals.squaredNorm() / static_cast<double>(dof);
}

}  // namespace hdinfer::lasso

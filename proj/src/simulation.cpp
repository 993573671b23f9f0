// SPDX-License-Identifier: Apache-2.0
#include "hdinfer/simulation.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <limits>
#include <mutex>
#include <sstream>
#include <thread>

#include "hdinfer/lasso.hpp"

namespace hdinfer::simulation {

std::string sigma_kind_name(SigmaKind k) {
  switch (k) {
    case SigmaKind::Identity: return "identity";
    case SigmaKind::Equicorrelated: return "equicorrelated";
    case SigmaKind::Toeplitz: return "toeplitz";
  }
  return "?";
}

SigmaKind sigma_kind_from_name(const std::string& name) {
  if (name == "identity") return SigmaKind::Identity;
  if (name == "equicorrelated") return SigmaKind::Equicorrelated;
  if (name == "toeplitz") return SigmaKind::Toeplitz;
  throw ConfigError("unknown sigma kind '" + name + "'");
}

int SimulationConfig::sparsity() const {
  int s = 0;
  for (const auto& g : signal_groups) s += g.count;
  return s;
}

void SimulationConfig::validate() const {
  if (n < 2 || p < 2) throw ConfigError("need n >= 2 and p >= 2");
  if (replications < 1) throw ConfigError("replications must be >= 1");
  if (sparsity() > p) throw ConfigError("signal group counts exceed p");
  if (!(noise_sigma2 > 0.0)) throw ConfigError("noise_sigma2 must be > 0");
  if (!(alpha > 0.0 && alpha < 1.0)) throw ConfigError("alpha not in (0,1)");
  if (sigma_kind == SigmaKind::Equicorrelated &&
      !(rho > -1.0 / (p - 1) && rho < 1.0)) {
    throw ConfigError("equicorrelated rho outside (-1/(p-1), 1)");
  }
  if (sigma_kind == SigmaKind::Toeplitz && !(std::abs(rho) < 1.0)) {
    throw ConfigError("toeplitz rho outside (-1, 1)");
  }
  if (noise_family == NoiseFamily::StudentT && !(noise_df > 2.0)) {
    throw ConfigError("student-t noise needs df > 2");
  }
  if (design_family == DesignFamily::StudentT && !(design_df > 2.0)) {
    throw ConfigError("student-t design needs df > 2");
  }
  for (Method m : methods) {
    if (m == Method::RLS && (rls_k < 1 || rls_k > n || rls_ensemble < 1)) {
      throw ConfigError("invalid RLS tuning (k, ensemble)");
    }
    if (m == Method::RID && !(ridge_gamma > 0.0)) {
      throw ConfigError("ridge gamma must be > 0");
    }
  }
}

Eigen::MatrixXd make_sigma(SigmaKind kind, int p, double rho) {
  Eigen::MatrixXd sigma(p, p);
  switch (kind) {
    case SigmaKind::Identity:
      sigma = Eigen::MatrixXd::Identity(p, p);
      break;
    case SigmaKind::Equicorrelated:
      sigma.setConstant(rho);
      sigma.diagonal().setOnes();
      break;
    case SigmaKind::Toeplitz:
      for (int j = 0; j < p; ++j) {
        for (int k = 0; k < p; ++k) {
          sigma(j, k) = std::pow(rho, std::abs(j - k));
        }
      }
      break;
  }
  linalg::cholesky(sigma);  // positive definiteness gate
  return sigma;
}

namespace {

// Marsaglia-Tsang gamma sampler, shape >= 1.
double sample_gamma(double shape, linalg::RngStream& rng) {
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  for (;;) {
    double z, v;
    do {
      z = rng.next_gaussian();
      v = 1.0 + c * z;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.next_uniform();
    if (u < 1.0 - 0.0331 * z * z * z * z) return d * v;
    if (u > 0.0 && std::log(u) < 0.5 * z * z + d * (1.0 - v + std::log(v))) {
      return d * v;
    }
  }
}

double sample_chi2(double df, linalg::RngStream& rng) {
  return 2.0 * sample_gamma(df / 2.0, rng);
}

}  // namespace

Eigen::MatrixXd sample_design(int n, int p, const Eigen::MatrixXd& sigma,
                              DesignFamily family, double df,
                              linalg::RngStream& rng) {
  const Eigen::MatrixXd chol = linalg::cholesky(sigma).factor;
  Eigen::MatrixXd z = linalg::sample_gaussian_matrix(n, p, rng);
  Eigen::MatrixXd x = z * chol.transpose();
  if (family == DesignFamily::StudentT) {
    // Elliptical rows: a common sqrt(df/chi2_df) factor per row.
    for (int i = 0; i < n; ++i) {
      x.row(i) *= std::sqrt(df / sample_chi2(df, rng));
    }
  }
  return x;
}

BetaDraw make_beta(int p, const std::vector<SignalGroup>& groups,
                   double sigma2, int n, linalg::RngStream& rng) {
  int total = 0;
  for (const auto& g : groups) total += g.count;
  if (total > p) {
    throw TooManyNonzeros("make_beta: group counts exceed p");
  }
  auto support = linalg::sample_without_replacement(p, total, rng);

  BetaDraw out;
  out.beta = Eigen::VectorXd::Zero(p);
  std::size_t pos = 0;
  for (const auto& g : groups) {
    std::vector<Eigen::Index> idx;
    for (int c = 0; c < g.count; ++c) {
      const Eigen::Index j = support[pos++];
      out.beta(j) = std::sqrt(sigma2 / static_cast<double>(n)) * g.b;
      idx.push_back(j);
    }
    out.group_support.push_back(std::move(idx));
  }
  return out;
}

namespace {

struct GroupAccum {
  double sum_coef = 0.0;
  double sum_se = 0.0;
  long covered = 0;
  long rejected = 0;  // CI excludes zero
  long count = 0;
};

struct RepResult {
  // [method][group]; the zero group is appended last.
  std::vector<std::vector<GroupAccum>> cells;
  double sigma2_hat = std::numeric_limits<double>::quiet_NaN();
  double max_offdiag = std::numeric_limits<double>::quiet_NaN();
  int attempts_used = 1;
};

int worker_count(int replications) {
  unsigned hw = std::thread::hardware_concurrency();
  int threads = hw == 0 ? 1 : static_cast<int>(hw);
  if (const char* env = std::getenv("HDINFER_THREADS")) {
    const int cap = std::atoi(env);
    if (cap >= 1) threads = std::min(threads, cap);
  }
  return std::max(1, std::min(threads, replications));
}

ApproximateInverse build_inverse(Method method, const Eigen::MatrixXd& x,
                                 const SimulationConfig& cfg,
                                 linalg::RngStream& rng) {
  switch (method) {
    case Method::MPI: return mpi_inverse(x);
    case Method::RLS:
      return rls_inverse_ensemble(x, cfg.rls_k, cfg.rls_ensemble, rng);
    case Method::RID: return ridge_inverse(x, cfg.ridge_gamma);
  }
  throw ConfigError("unknown method");
}

RepResult run_replication(const SimulationConfig& cfg,
                          const Eigen::MatrixXd& sigma,
                          const Eigen::MatrixXd* fixed_design, int rep,
                          int attempt) {
  linalg::RngStream base(cfg.seed);
  linalg::RngStream rep_stream =
      base.child(static_cast<std::uint64_t>(rep))
          .child(static_cast<std::uint64_t>(attempt));
  auto design_rng = rep_stream.child(0);
  auto beta_rng = rep_stream.child(1);
  auto noise_rng = rep_stream.child(2);
  auto cv_rng = rep_stream.child(3);

  Eigen::MatrixXd x_local;
  const Eigen::MatrixXd* x = fixed_design;
  if (x == nullptr) {
    x_local = sample_design(cfg.n, cfg.p, sigma, cfg.design_family,
                            cfg.design_df, design_rng);
    x = &x_local;
  }

  BetaDraw beta = make_beta(cfg.p, cfg.signal_groups, cfg.noise_sigma2, cfg.n,
                            beta_rng);

  Eigen::VectorXd eps(cfg.n);
  if (cfg.noise_family == NoiseFamily::Gaussian) {
    for (int i = 0; i < cfg.n; ++i) {
      eps(i) = std::sqrt(cfg.noise_sigma2) * noise_rng.next_gaussian();
    }
  } else {
    // i.i.d. Student-t rescaled to variance noise_sigma2.
    const double scale =
        std::sqrt(cfg.noise_sigma2 * (cfg.noise_df - 2.0) / cfg.noise_df);
    for (int i = 0; i < cfg.n; ++i) {
      const double t = noise_rng.next_gaussian() /
                       std::sqrt(sample_chi2(cfg.noise_df, noise_rng) /
                                 cfg.noise_df);
      eps(i) = scale * t;
    }
  }
  Eigen::VectorXd y = (*x) * beta.beta + eps;

  RepResult result;
  result.cells.assign(cfg.methods.size(),
                      std::vector<GroupAccum>(cfg.signal_groups.size() + 1));
  if (cfg.methods.empty() && !cfg.collect_diagnostics) {
    return result;
  }

  auto cv = lasso::cv_lasso(*x, y, cfg.cv_folds, cfg.cv_grid, cv_rng);
  result.sigma2_hat = lasso::noise_level(cv.fit, cfg.n);

  // Zero-coefficient coordinates: everything outside the signal supports.
  std::vector<char> is_signal(static_cast<std::size_t>(cfg.p), 0);
  for (const auto& g : beta.group_support) {
    for (Eigen::Index j : g) is_signal[static_cast<std::size_t>(j)] = 1;
  }

  for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
    auto method_rng = rep_stream.child(16 + mi);
    ApproximateInverse minv =
        build_inverse(cfg.methods[mi], *x, cfg, method_rng);
    OmegaDiagonal omega = omega_diagonal(minv);
    Eigen::VectorXd beta_c = inference::debias(minv, *x, y, cv.fit.beta);
    inference::DebiasedFit fit = inference::confidence_intervals(
        beta_c, omega.values, result.sigma2_hat, cfg.n, cfg.alpha,
        cfg.methods[mi]);
    Eigen::VectorXd se = fit.standard_errors(cfg.n);

    if (cfg.collect_diagnostics && mi == 0) {
      result.max_offdiag =
          inference::bias_diagnostic(minv, *x, cv.fit.beta).max_offdiag;
    }

    auto tally = [&](GroupAccum& acc, Eigen::Index j, double truth) {
      acc.sum_coef += beta_c(j);
      acc.sum_se += se(j);
      acc.covered +=
          (fit.ci_lower(j) <= truth && truth <= fit.ci_upper(j)) ? 1 : 0;
      acc.rejected += (fit.ci_lower(j) > 0.0 || fit.ci_upper(j) < 0.0) ? 1 : 0;
      acc.count += 1;
    };

    for (std::size_t gi = 0; gi < beta.group_support.size(); ++gi) {
      for (Eigen::Index j : beta.group_support[gi]) {
        tally(result.cells[mi][gi], j, beta.beta(j));
      }
    }
    GroupAccum& zero_cell = result.cells[mi].back();
    for (int j = 0; j < cfg.p; ++j) {
      if (!is_signal[static_cast<std::size_t>(j)]) {
        tally(zero_cell, j, 0.0);
      }
    }
  }
  return result;
}

}  // namespace

ExperimentReport run_experiment(const SimulationConfig& cfg) {
  cfg.validate();
  const Eigen::MatrixXd sigma = make_sigma(cfg.sigma_kind, cfg.p, cfg.rho);

  Eigen::MatrixXd fixed_design;
  const Eigen::MatrixXd* fixed = nullptr;
  if (!cfg.redraw_design) {
    linalg::RngStream design_rng =
        linalg::RngStream(cfg.seed).child(UINT64_MAX);
    fixed_design = sample_design(cfg.n, cfg.p, sigma, cfg.design_family,
                                 cfg.design_df, design_rng);
    fixed = &fixed_design;
  }

  const int max_total_redraws =
      std::max(1, cfg.replications / 20);  // 5% redraw budget

  std::vector<RepResult> results(static_cast<std::size_t>(cfg.replications));
  std::atomic<int> next_rep{0};
  std::atomic<int> total_redraws{0};
  std::mutex error_mutex;
  std::exception_ptr first_error;

  auto work = [&]() {
    for (;;) {
      const int rep = next_rep.fetch_add(1);
      if (rep >= cfg.replications) return;
      {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (first_error) return;
      }
      int attempt = 0;
      for (;;) {
        try {
          results[static_cast<std::size_t>(rep)] =
              run_replication(cfg, sigma, fixed, rep, attempt);
          results[static_cast<std::size_t>(rep)].attempts_used = attempt + 1;
          break;
        } catch (const Error&) {
          const int used = total_redraws.fetch_add(1) + 1;
          if (used > max_total_redraws || attempt >= 10) {
            std::lock_guard<std::mutex> lock(error_mutex);
            if (!first_error) {
              first_error = std::make_exception_ptr(TooManyRedraws(
                  "replication redraw budget exhausted"));
            }
            return;
          }
          ++attempt;
        }
      }
    }
  };

  const int threads = worker_count(cfg.replications);
  if (threads == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(threads));
    for (int t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (first_error) std::rethrow_exception(first_error);

  // Ordered reduction over replication index; output is independent of the
  // thread schedule.
  ExperimentReport report;
  report.replications = cfg.replications;
  const std::size_t n_groups = cfg.signal_groups.size() + 1;
  std::vector<std::vector<GroupAccum>> totals(
      cfg.methods.size(), std::vector<GroupAccum>(n_groups));
  double sigma2_sum = 0.0;
  long sigma2_count = 0;
  double offdiag_sum = 0.0;
  long offdiag_count = 0;
  for (const RepResult& r : results) {
    report.redraws += r.attempts_used - 1;
    if (std::isfinite(r.sigma2_hat)) {
      sigma2_sum += r.sigma2_hat;
      ++sigma2_count;
    }
    if (std::isfinite(r.max_offdiag)) {
      offdiag_sum += r.max_offdiag;
      ++offdiag_count;
    }
    for (std::size_t mi = 0; mi < totals.size(); ++mi) {
      for (std::size_t gi = 0; gi < n_groups; ++gi) {
        const GroupAccum& src = r.cells[mi][gi];
        GroupAccum& dst = totals[mi][gi];
        dst.sum_coef += src.sum_coef;
        dst.sum_se += src.sum_se;
        dst.covered += src.covered;
        dst.rejected += src.rejected;
        dst.count += src.count;
      }
    }
  }
  report.mean_sigma2_hat =
      sigma2_count > 0 ? sigma2_sum / sigma2_count
                       : std::numeric_limits<double>::quiet_NaN();
  report.mean_max_offdiag =
      offdiag_count > 0 ? offdiag_sum / offdiag_count
                        : std::numeric_limits<double>::quiet_NaN();

  for (std::size_t mi = 0; mi < cfg.methods.size(); ++mi) {
    for (std::size_t gi = 0; gi < n_groups; ++gi) {
      const GroupAccum& acc = totals[mi][gi];
      if (acc.count == 0) continue;
      CellStats cell;
      cell.method = cfg.methods[mi];
      cell.b = gi < cfg.signal_groups.size() ? cfg.signal_groups[gi].b : 0.0;
      cell.count = acc.count;
      const double c = static_cast<double>(acc.count);
      cell.mean_coef = acc.sum_coef / c;
      cell.mean_se = acc.sum_se / c;
      cell.coverage = static_cast<double>(acc.covered) / c;
      cell.power = gi < cfg.signal_groups.size()
                       ? static_cast<double>(acc.rejected) / c
                       : std::numeric_limits<double>::quiet_NaN();
      report.cells.push_back(cell);
    }
  }
  return report;
}

VarianceOrderingReport check_variance_ordering(const Eigen::MatrixXd& x, int k,
                                               double gamma,
                                               Method shared_d_source,
                                               int v_samples,
                                               linalg::RngStream& rng) {
  ApproximateInverse mpi = mpi_inverse(x);
  ApproximateInverse rls = rls_inverse_spectral(x, k, v_samples, rng);
  ApproximateInverse rid = ridge_inverse(x, gamma);

  const ApproximateInverse* source = &mpi;
  if (shared_d_source == Method::RLS) source = &rls;
  if (shared_d_source == Method::RID) source = &rid;
  const Eigen::VectorXd shared_d = source->d;

  VarianceOrderingReport rep;
  rep.shared_d_source = shared_d_source;
  rep.omega_mpi = omega_diagonal_shared(mpi, shared_d);
  rep.omega_rls = omega_diagonal_shared(rls, shared_d);
  rep.omega_rid = omega_diagonal_shared(rid, shared_d);
  rep.max_rls_minus_mpi = (rep.omega_rls - rep.omega_mpi).maxCoeff();
  rep.max_rid_minus_mpi = (rep.omega_rid - rep.omega_mpi).maxCoeff();

  Eigen::VectorXd sorted = rep.omega_mpi;
  std::sort(sorted.data(), sorted.data() + sorted.size());
  rep.median_omega_mpi = sorted(sorted.size() / 2);

  const Eigen::VectorXd own_mpi = omega_diagonal(mpi).values;
  rep.own_d_max_rls_minus_mpi =
      (omega_diagonal(rls).values - own_mpi).maxCoeff();
  rep.own_d_max_rid_minus_mpi =
      (omega_diagonal(rid).values - own_mpi).maxCoeff();
  return rep;
}

BiasScaleReport check_bias_scale(const std::vector<std::pair<int, int>>& grid,
                                 int seeds, SigmaKind kind, double rho,
                                 linalg::RngStream& rng) {
  BiasScaleReport report;
  for (std::size_t g = 0; g < grid.size(); ++g) {
    const auto [n, p] = grid[g];
    if (n >= p) throw ConfigError("check_bias_scale: need n < p");
    const Eigen::MatrixXd sigma = make_sigma(kind, p, rho);
    std::vector<double> ratios;
    ratios.reserve(static_cast<std::size_t>(seeds));
    const double scale = std::sqrt(std::log(static_cast<double>(p)) /
                                   static_cast<double>(n));
    for (int s = 0; s < seeds; ++s) {
      auto draw_rng = rng.child(g * 100003 + static_cast<std::uint64_t>(s));
      Eigen::MatrixXd x = sample_design(n, p, sigma, DesignFamily::Gaussian,
                                        0.0, draw_rng);
      ApproximateInverse minv = mpi_inverse(x);
      const double off =
          inference::bias_diagnostic(minv, x, Eigen::VectorXd::Zero(p))
              .max_offdiag;
      ratios.push_back(off / scale);
    }
    std::sort(ratios.begin(), ratios.end());
    BiasScalePoint point;
    point.n = n;
    point.p = p;
    point.median_ratio = ratios[ratios.size() / 2];
    report.points.push_back(point);
  }
  double lo = std::numeric_limits<double>::infinity();
  double hi = 0.0;
  for (const auto& pt : report.points) {
    lo = std::min(lo, pt.median_ratio);
    hi = std::max(hi, pt.median_ratio);
  }
  report.max_relative_spread = lo > 0.0 ? (hi - lo) / lo : 0.0;
  return report;
}

std::string report_csv(const ExperimentReport& report) {
  std::ostringstream out;
  out << "method,b,count,coef,se,cr,power\n";
  out.precision(10);
  for (const CellStats& cell : report.cells) {
    out << method_name(cell.method) << ',' << cell.b << ',' << cell.count
        << ',' << cell.mean_coef << ',' << cell.mean_se << ',' << cell.coverage
        << ',';
    if (std::isfinite(cell.power)) out << cell.power;
    out << '\n';
  }
  return out.str();
}

}  // namespace hdinfer::simulation

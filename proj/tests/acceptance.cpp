// SPDX-License-Identifier: Apache-2.0
//
// Acceptance checks, one per command line argument 1..10. Each prints a
// single PASS/FAIL line with the measured quantities and exits nonzero on
// failure.
#include <Eigen/Dense>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "hdinfer/app.hpp"
#include "hdinfer/inference.hpp"
#include "hdinfer/lasso.hpp"
#include "hdinfer/simulation.hpp"

using namespace hdinfer;
using namespace hdinfer::simulation;

namespace {

constexpr std::uint64_t kSeed = 20240815;

struct Check {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    pass = pass && ok;
    detail << (ok ? " [ok] " : " [FAIL] ") << what;
  }
};

SimulationConfig table_cell(SigmaKind kind, double rho) {
  SimulationConfig cfg;
  cfg.n = 100;
  cfg.p = 200;
  cfg.sigma_kind = kind;
  cfg.rho = rho;
  cfg.signal_groups = {{2.0, 3}};
  cfg.noise_sigma2 = 1.0;
  cfg.replications = 200;
  cfg.methods = {Method::MPI};
  cfg.seed = kSeed;
  return cfg;
}

const CellStats& find_cell(const ExperimentReport& rep, Method m, double b) {
  for (const CellStats& cell : rep.cells) {
    if (cell.method == m && cell.b == b) return cell;
  }
  throw std::runtime_error("cell not found");
}

std::string band(const char* name, double value, double lo, double hi) {
  std::ostringstream s;
  s.precision(4);
  s << name << "=" << value << " in [" << lo << "," << hi << "]";
  return s.str();
}

int criterion_1() {
  ExperimentReport rep = run_experiment(table_cell(SigmaKind::Equicorrelated, 0.8));
  const CellStats& sig = find_cell(rep, Method::MPI, 2.0);
  const CellStats& zero = find_cell(rep, Method::MPI, 0.0);
  Check c;
  c.require(sig.mean_coef >= 0.16 && sig.mean_coef <= 0.22,
            band("coef", sig.mean_coef, 0.16, 0.22));
  c.require(sig.mean_se >= 0.25 && sig.mean_se <= 0.35,
            band("se", sig.mean_se, 0.25, 0.35));
  c.require(zero.coverage >= 0.92 && zero.coverage <= 0.97,
            band("cr0", zero.coverage, 0.92, 0.97));
  c.require(sig.power >= 0.05 && sig.power <= 0.15,
            band("power", sig.power, 0.05, 0.15));
  std::cout << "criterion 1 (equicorrelated cell): "
            << (c.pass ? "PASS" : "FAIL") << c.detail.str() << "\n";
  return c.pass ? 0 : 1;
}

int criterion_2() {
  ExperimentReport rep = run_experiment(table_cell(SigmaKind::Toeplitz, 0.9));
  const CellStats& sig = find_cell(rep, Method::MPI, 2.0);
  const CellStats& zero = find_cell(rep, Method::MPI, 0.0);
  Check c;
  c.require(sig.mean_se >= 0.30 && sig.mean_se <= 0.40,
            band("se", sig.mean_se, 0.30, 0.40));
  c.require(zero.coverage >= 0.92 && zero.coverage <= 0.97,
            band("cr0", zero.coverage, 0.92, 0.97));
  c.require(sig.power >= 0.04 && sig.power <= 0.13,
            band("power", sig.power, 0.04, 0.13));
  std::cout << "criterion 2 (toeplitz cell): " << (c.pass ? "PASS" : "FAIL")
            << c.detail.str() << "\n";
  return c.pass ? 0 : 1;
}

int criterion_3() {
  Check c;
  for (auto [kind, rho, label] :
       {std::tuple{SigmaKind::Equicorrelated, 0.8, "equicorr"},
        std::tuple{SigmaKind::Toeplitz, 0.9, "toeplitz"}}) {
    SimulationConfig cfg = table_cell(kind, rho);
    cfg.methods = {Method::MPI, Method::RLS, Method::RID};
    cfg.rls_k = 90;
    cfg.rls_ensemble = 1000;
    cfg.ridge_gamma = 1.0;
    ExperimentReport rep = run_experiment(cfg);
    for (double b : {2.0, 0.0}) {
      const double mpi = find_cell(rep, Method::MPI, b).mean_se;
      const double rls = find_cell(rep, Method::RLS, b).mean_se;
      const double rid = find_cell(rep, Method::RID, b).mean_se;
      std::ostringstream what;
      what.precision(4);
      what << label << " b=" << b << " se(mpi,rls,rid)=(" << mpi << ","
           << rls << "," << rid << ")";
      c.require(rls < mpi && rid < mpi && rls <= rid, what.str());
    }
  }
  std::cout << "criterion 3 (regularized SE ordering): "
            << (c.pass ? "PASS" : "FAIL") << c.detail.str() << "\n";
  return c.pass ? 0 : 1;
}

int criterion_4() {
  linalg::RngStream rng(kSeed);
  Check c;
  double worst_rls = -1e300, worst_rid = -1e300;
  for (int rep = 0; rep < 20; ++rep) {
    auto r = rng.child(rep);
    auto design_rng = r.child(0);
    Eigen::MatrixXd x = linalg::sample_gaussian_matrix(50, 120, design_rng);
    auto check_rng = r.child(1);
    VarianceOrderingReport report = check_variance_ordering(
        x, 45, recommended_gamma(50, 120, 1.0), Method::MPI, 10000,
        check_rng);
    const double rls_rel = report.max_rls_minus_mpi / report.median_omega_mpi;
    worst_rls = std::max(worst_rls, rls_rel);
    worst_rid = std::max(worst_rid, report.max_rid_minus_mpi);
  }
  std::ostringstream what;
  what.precision(4);
  what << "max rls excess/median=" << worst_rls << " (tol 1e-3), max rid"
       << " excess=" << worst_rid << " (tol 1e-12)";
  c.require(worst_rls <= 1e-3 && worst_rid <= 1e-12, what.str());
  std::cout << "criterion 4 (shared-D variance ordering): "
            << (c.pass ? "PASS" : "FAIL") << c.detail.str() << "\n";
  return c.pass ? 0 : 1;
}

int criterion_5() {
  linalg::RngStream rng(kSeed + 5);
  double worst = 0.0;
  for (int rep = 0; rep < 10; ++rep) {
    Eigen::MatrixXd x = linalg::sample_gaussian_matrix(10, 30, rng);
    ApproximateInverse mpi = mpi_inverse(x);
    ApproximateInverse rid = ridge_inverse(x, 1e-8 * 30.0);
    worst = std::max(worst, (rid.m - mpi.m).norm() / mpi.m.norm());
  }
  Check c;
  std::ostringstream what;
  what.precision(4);
  what << "max relative frobenius distance=" << worst << " (tol 1e-6)";
  c.require(worst <= 1e-6, what.str());
  std::cout << "criterion 5 (ridge small-penalty limit): "
            << (c.pass ? "PASS" : "FAIL") << c.detail.str() << "\n";
  return c.pass ? 0 : 1;
}

int criterion_6() {
  linalg::RngStream rng(kSeed + 6);
  double worst = 0.0;
  for (int rep = 0; rep < 5; ++rep) {
    auto r = rng.child(rep);
    Eigen::MatrixXd x = linalg::sample_gaussian_matrix(12, 28, r);
    ApproximateInverse mpi = mpi_inverse(x);
    auto r1 = r.child(1);
    worst = std::max(worst, (rls_inverse_ensemble(x, 12, 1, r1).m - mpi.m)
                                .cwiseAbs()
                                .maxCoeff());
    auto r2 = r.child(2);
    worst = std::max(worst, (rls_inverse_spectral(x, 12, 1, r2).m - mpi.m)
                                .cwiseAbs()
                                .maxCoeff());
  }
  Check c;
  std::ostringstream what;
  what.precision(4);
  what << "max entrywise deviation=" << worst << " (tol 1e-8)";
  c.require(worst <= 1e-8, what.str());
  std::cout << "criterion 6 (rls k=n exactness): "
            << (c.pass ? "PASS" : "FAIL") << c.detail.str() << "\n";
  return c.pass ? 0 : 1;
}

Eigen::VectorXd proximal_reference(const Eigen::MatrixXd& x,
                                   const Eigen::VectorXd& y, double lambda,
                                   int iters) {
  const double n = static_cast<double>(x.rows());
  const Eigen::MatrixXd gram = x.transpose() * x;
  const double lipschitz =
      2.0 / n *
      gram.selfadjointView<Eigen::Lower>().eigenvalues().maxCoeff();
  const double step = 1.0 / lipschitz;
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(x.cols());
  for (int it = 0; it < iters; ++it) {
    Eigen::VectorXd z =
        beta - step * (2.0 / n) * (gram * beta - x.transpose() * y);
    const double cut = lambda * step;
    for (Eigen::Index j = 0; j < z.size(); ++j) {
      beta(j) = z(j) > cut ? z(j) - cut : (z(j) < -cut ? z(j) + cut : 0.0);
    }
  }
  return beta;
}

int criterion_7() {
  linalg::RngStream rng(kSeed + 7);
  Check c;

  long kkt_failures = 0;
  for (int rep = 0; rep < 100; ++rep) {
    auto r = rng.child(rep);
    const int n = 10 + static_cast<int>(r.next_below(41));   // <= 50
    const int p = 10 + static_cast<int>(r.next_below(91));   // <= 100
    Eigen::MatrixXd x = linalg::sample_gaussian_matrix(n, p, r);
    Eigen::VectorXd y = linalg::sample_gaussian_matrix(n, 1, r);
    const double lambda =
        (0.05 + 0.9 * r.next_uniform()) * lasso::lambda_max(x, y);
    lasso::LassoFit fit = lasso::lasso_fit(x, y, lambda);
    Eigen::VectorXd grad =
        (2.0 / n) * (x.transpose() * (y - x * fit.beta));
    for (Eigen::Index j = 0; j < p; ++j) {
      const bool ok =
          fit.beta(j) != 0.0
              ? std::abs(-grad(j) + lambda * (fit.beta(j) > 0 ? 1.0 : -1.0)) <=
                    1e-6 * lambda
              : std::abs(grad(j)) <= lambda * (1.0 + 1e-6);
      if (!ok) ++kkt_failures;
    }
  }
  c.require(kkt_failures == 0, "KKT violations on 100 instances: " +
                                   std::to_string(kkt_failures));

  double worst_gap = 0.0;
  for (int rep = 0; rep < 20; ++rep) {
    auto r = rng.child(1000 + rep);
    const int n = 15 + static_cast<int>(r.next_below(15));
    const int p = 2 + static_cast<int>(r.next_below(5));
    Eigen::MatrixXd x = linalg::sample_gaussian_matrix(n, p, r);
    Eigen::VectorXd y = linalg::sample_gaussian_matrix(n, 1, r);
    const double lambda = 0.3 * lasso::lambda_max(x, y);
    lasso::LassoFit fit = lasso::lasso_fit(x, y, lambda);
    Eigen::VectorXd ref = proximal_reference(x, y, lambda, 30000);
    const double obj_fit = (y - x * fit.beta).squaredNorm() / n +
                           lambda * fit.beta.lpNorm<1>();
    const double obj_ref =
        (y - x * ref).squaredNorm() / n + lambda * ref.lpNorm<1>();
    worst_gap = std::max(worst_gap, std::abs(obj_fit - obj_ref));
  }
  std::ostringstream what;
  what.precision(4);
  what << "max objective gap vs proximal reference=" << worst_gap
       << " (tol 1e-8)";
  c.require(worst_gap <= 1e-8, what.str());

  std::cout << "criterion 7 (lasso correctness): "
            << (c.pass ? "PASS" : "FAIL") << c.detail.str() << "\n";
  return c.pass ? 0 : 1;
}

int criterion_8() {
  linalg::RngStream rng(kSeed + 8);
  BiasScaleReport rep = check_bias_scale(
      {{50, 100}, {100, 200}, {200, 400}}, 50, SigmaKind::Identity, 0.0, rng);
  Check c;
  std::ostringstream what;
  what.precision(4);
  what << "median ratios=(";
  for (std::size_t i = 0; i < rep.points.size(); ++i) {
    what << (i ? "," : "") << rep.points[i].median_ratio;
  }
  what << "), spread=" << rep.max_relative_spread << " (tol 0.2)";
  c.require(rep.max_relative_spread < 0.2, what.str());
  std::cout << "criterion 8 (bias-bound scale flatness): "
            << (c.pass ? "PASS" : "FAIL") << c.detail.str() << "\n";
  return c.pass ? 0 : 1;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in),
          std::istreambuf_iterator<char>()};
}

int criterion_9() {
  namespace fs = std::filesystem;
  const fs::path work = fs::temp_directory_path() / "hdinfer_accept9";
  fs::create_directories(work);

  // Synthetic dataset for the fit subcommand.
  linalg::RngStream rng(kSeed + 9);
  const int n = 40, p = 60;
  Eigen::MatrixXd x = linalg::sample_gaussian_matrix(n, p, rng);
  Eigen::VectorXd y =
      1.5 * x.col(3) + 0.5 * linalg::sample_gaussian_matrix(n, 1, rng);
  std::ostringstream csv;
  csv.precision(12);
  csv << "y";
  for (int j = 0; j < p; ++j) csv << ",x" << j;
  csv << "\n";
  for (int i = 0; i < n; ++i) {
    csv << y(i);
    for (int j = 0; j < p; ++j) csv << ',' << x(i, j);
    csv << "\n";
  }
  {
    std::ofstream out(work / "data.csv");
    out << csv.str();
  }
  {
    std::ofstream out(work / "sim.json");
    out << R"({"seed": 4, "simulate": {"n": 30, "p": 50,
      "sigma": "equicorrelated", "rho": 0.5,
      "signal_groups": [{"b": 2.0, "count": 2}],
      "replications": 3, "methods": ["mpi", "rid"],
      "cv_folds": 5, "cv_grid": 10}})";
  }
  {
    std::ofstream out(work / "fit.json");
    out << R"({"seed": 4, "fit": {"data": ")" << (work / "data.csv").string()
        << R"(", "target": "y", "lags": 1, "method": "rid",
           "ridge_gamma": 2.0, "cv_folds": 5, "cv_grid": 10}})";
  }
  {
    std::ofstream out(work / "diag.json");
    out << R"({"seed": 4, "diagnose": {"n": 30, "p": 60, "seeds": 5}})";
  }

  const std::string cli = (fs::current_path() / "hdinfer").string();
  Check c;
  struct Job {
    const char* sub;
    const char* cfg;
    std::vector<const char*> files;
  };
  const std::vector<Job> jobs = {
      {"simulate", "sim.json", {"experiment.csv", "experiment.json",
                                "manifest.json"}},
      {"fit", "fit.json", {"coefficients.csv", "significant.csv",
                           "manifest.json"}},
      {"diagnose", "diag.json", {"diagnostics.json", "manifest.json"}},
  };
  for (const Job& job : jobs) {
    bool identical = true;
    const fs::path out = work / job.sub;
    const std::string cmd = cli + " " + job.sub + " --config " +
                            (work / job.cfg).string() + " --out-dir " +
                            out.string();
    std::vector<std::string> first;
    for (int run = 0; run < 2; ++run) {
      const int rc = std::system(cmd.c_str());
      if (rc != 0) {
        c.require(false, std::string(job.sub) + " exited with " +
                             std::to_string(rc));
        identical = false;
      }
      for (std::size_t f = 0; f < job.files.size(); ++f) {
        if (run == 0) {
          first.push_back(slurp(out / job.files[f]));
        } else {
          identical = identical && slurp(out / job.files[f]) == first[f];
        }
      }
    }
    c.require(identical,
              std::string(job.sub) + " outputs byte-identical across reruns");
  }
  std::cout << "criterion 9 (CLI byte reproducibility): "
            << (c.pass ? "PASS" : "FAIL") << c.detail.str() << "\n";
  return c.pass ? 0 : 1;
}

int criterion_10() {
  SimulationConfig cfg = table_cell(SigmaKind::Equicorrelated, 0.8);
  cfg.noise_family = NoiseFamily::StudentT;
  cfg.noise_df = 5.0;
  ExperimentReport rep = run_experiment(cfg);
  const CellStats& zero = find_cell(rep, Method::MPI, 0.0);
  Check c;
  c.require(zero.coverage >= 0.91 && zero.coverage <= 0.98,
            band("cr0", zero.coverage, 0.91, 0.98));
  std::cout << "criterion 10 (student-t noise coverage): "
            << (c.pass ? "PASS" : "FAIL") << c.detail.str() << "\n";
  return c.pass ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: acceptance <criterion 1..10>\n";
    return 2;
  }
  const int which = std::atoi(argv[1]);
  try {
    switch (which) {
      case 1: return criterion_1();
      case 2: return criterion_2();
      case 3: return criterion_3();
      case 4: return criterion_4();
      case 5: return criterion_5();
      case 6: return criterion_6();
      case 7: return criterion_7();
      case 8: return criterion_8();
      case 9: return criterion_9();
      case 10: return criterion_10();
      default:
        std::cerr << "unknown criterion " << which << "\n";
        return 2;
    }
  } catch (const std::exception& e) {
    std::cout << "criterion " << which << ": FAIL (exception: " << e.what()
              << ")\n";
    return 1;
  }
}

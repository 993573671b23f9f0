// SPDX-License-Identifier: Apache-2.0
#include "hdinfer/app.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "hdinfer/inference.hpp"
#include "hdinfer/lasso.hpp"

namespace hdinfer::app {

namespace {

constexpr const char* kVersion = "hdinfer 0.1.0";

bool is_missing(const std::string& cell) {
  return cell.empty() || cell == "NA" || cell == "na" || cell == "NaN";
}

double parse_cell(const std::string& cell, std::size_t row, std::size_t col) {
  const char* begin = cell.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0' || !std::isfinite(v)) {
    throw ParseError("cannot parse '" + cell + "' at row " +
                     std::to_string(row + 1) + ", column " +
                     std::to_string(col + 1));
  }
  return v;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

bool looks_numeric(const std::string& cell) {
  if (is_missing(cell)) return true;
  const char* begin = cell.c_str();
  char* end = nullptr;
  std::strtod(begin, &end);
  return end != begin && *end == '\0';
}

}  // namespace

Eigen::Index Dataset::column_index(const std::string& name) const {
  const auto it =
      std::find(column_names.begin(), column_names.end(), name);
  if (it == column_names.end()) {
    throw ConfigError("no column named '" + name + "'");
  }
  return static_cast<Eigen::Index>(it - column_names.begin());
}

Dataset read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open '" + path + "'");

  std::vector<std::vector<std::string>> raw;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() && raw.empty()) continue;
    raw.push_back(split_csv_line(line));
  }
  while (!raw.empty() && raw.back().empty()) raw.pop_back();
  if (raw.size() < 2) throw ParseError("'" + path + "': no data rows");

  const std::size_t width = raw[0].size();
  for (std::size_t r = 1; r < raw.size(); ++r) {
    if (raw[r].size() != width) {
      throw RaggedRows("row " + std::to_string(r + 1) + " has " +
                       std::to_string(raw[r].size()) + " cells, expected " +
                       std::to_string(width));
    }
  }

  // A non-numeric first data column is treated as row labels.
  bool labeled = false;
  for (std::size_t r = 1; r < raw.size(); ++r) {
    if (!looks_numeric(raw[r][0])) {
      labeled = true;
      break;
    }
  }

  const std::size_t first_col = labeled ? 1 : 0;
  const std::size_t n_rows = raw.size() - 1;
  const std::size_t n_cols = width - first_col;
  if (n_cols == 0) throw ParseError("'" + path + "': no numeric columns");

  Dataset data;
  data.column_names.assign(raw[0].begin() + static_cast<long>(first_col),
                           raw[0].end());
  data.values.resize(static_cast<Eigen::Index>(n_rows),
                     static_cast<Eigen::Index>(n_cols));
  for (std::size_t r = 0; r < n_rows; ++r) {
    if (labeled) data.row_labels.push_back(raw[r + 1][0]);
    for (std::size_t c = 0; c < n_cols; ++c) {
      const std::string& cell = raw[r + 1][c + first_col];
      data.values(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          is_missing(cell)
              ? std::numeric_limits<double>::quiet_NaN()
              : parse_cell(cell, r + 1, c + first_col);
    }
  }
  return data;
}

Dataset fill_missing(const Dataset& data) {
  Dataset out = data;
  for (Eigen::Index c = 0; c < out.cols(); ++c) {
    if (std::isnan(out.values(0, c))) {
      throw LeadingMissing("column '" + out.column_names[c] +
                           "' starts with a missing value");
    }
    for (Eigen::Index r = 1; r < out.rows(); ++r) {
      if (std::isnan(out.values(r, c))) {
        out.values(r, c) = out.values(r - 1, c);
      }
    }
  }
  return out;
}

StandardizeResult standardize(const Dataset& data) {
  const Eigen::Index n = data.rows();
  StandardizeResult out;
  out.data = data;
  out.means = data.values.colwise().mean();
  out.sds.resize(data.cols());
  for (Eigen::Index c = 0; c < data.cols(); ++c) {
    const Eigen::VectorXd centered =
        data.values.col(c).array() - out.means(c);
    const double sd =
        std::sqrt(centered.squaredNorm() / static_cast<double>(n));
    if (!(sd > 1e-12 * std::max(1.0, std::abs(out.means(c))))) {
      throw ConstantColumn("column '" + data.column_names[c] +
                           "' has zero variance");
    }
    out.sds(c) = sd;
    out.data.values.col(c) = centered / sd;
  }
  return out;
}

Dataset apply_transforms(const Dataset& data, const std::vector<int>& codes) {
  if (static_cast<Eigen::Index>(codes.size()) != data.cols()) {
    throw ConfigError("transforms: need one code per column");
  }
  bool differences = false;
  for (int code : codes) {
    if (code != 1 && code != 2 && code != 4 && code != 5) {
      throw ConfigError("transforms: unknown code " + std::to_string(code));
    }
    if (code == 2 || code == 5) differences = true;
  }
  if (differences && data.rows() < 2) {
    throw InsufficientRows("transforms: differencing needs >= 2 rows");
  }

  Eigen::MatrixXd work = data.values;
  for (Eigen::Index c = 0; c < data.cols(); ++c) {
    const int code = codes[static_cast<std::size_t>(c)];
    if (code == 4 || code == 5) {
      if ((work.col(c).array() <= 0.0).any()) {
        throw OutOfDomain("transforms: log of non-positive value in column '" +
                          data.column_names[c] + "'");
      }
      work.col(c) = work.col(c).array().log();
    }
    if (code == 2 || code == 5) {
      work.col(c).tail(work.rows() - 1) =
          work.col(c).tail(work.rows() - 1) - work.col(c).head(work.rows() - 1);
    }
  }

  Dataset out;
  out.column_names = data.column_names;
  if (differences) {
    out.values = work.bottomRows(work.rows() - 1);
    if (!data.row_labels.empty()) {
      out.row_labels.assign(data.row_labels.begin() + 1,
                            data.row_labels.end());
    }
  } else {
    out.values = std::move(work);
    out.row_labels = data.row_labels;
  }
  return out;
}

Dataset build_lags(const Dataset& data, const std::string& column, int lags) {
  if (lags < 1) throw ConfigError("build_lags: lags must be >= 1");
  const Eigen::Index n = data.rows();
  if (n <= lags) {
    throw InsufficientRows("build_lags: need more rows than lags");
  }
  const Eigen::Index j = data.column_index(column);

  Dataset out;
  out.column_names = data.column_names;
  out.values.resize(n - lags, data.cols() + lags);
  out.values.leftCols(data.cols()) = data.values.bottomRows(n - lags);
  for (int ell = 1; ell <= lags; ++ell) {
    out.column_names.push_back(column + "_lag" + std::to_string(ell));
    out.values.col(data.cols() + ell - 1) =
        data.values.col(j).segment(lags - ell, n - lags);
  }
  if (!data.row_labels.empty()) {
    out.row_labels.assign(data.row_labels.begin() + lags,
                          data.row_labels.end());
  }
  return out;
}

namespace {

using nlohmann::json;

void reject_unknown_keys(const json& obj, const char* section,
                         std::initializer_list<const char*> allowed) {
  for (const auto& [key, value] : obj.items()) {
    (void)value;
    if (std::find_if(allowed.begin(), allowed.end(), [&](const char* a) {
          return key == a;
        }) == allowed.end()) {
      throw ConfigError(std::string("unknown key '") + key + "' in " +
                        section);
    }
  }
}

simulation::SimulationConfig parse_sim(const json& s) {
  reject_unknown_keys(
      s, "simulate",
      {"n", "p", "sigma", "rho", "signal_groups", "noise_sigma2", "noise",
       "noise_df", "design", "design_df", "replications", "methods", "rls_k",
       "rls_ensemble", "ridge_gamma", "cv_folds", "cv_grid", "alpha",
       "redraw_design", "collect_diagnostics"});
  simulation::SimulationConfig cfg;
  try {
    cfg.n = s.value("n", cfg.n);
    cfg.p = s.value("p", cfg.p);
    if (s.contains("sigma")) {
      cfg.sigma_kind =
          simulation::sigma_kind_from_name(s["sigma"].get<std::string>());
    }
    cfg.rho = s.value("rho", cfg.rho);
    if (s.contains("signal_groups")) {
      for (const auto& g : s["signal_groups"]) {
        cfg.signal_groups.push_back(
            {g.at("b").get<double>(), g.at("count").get<int>()});
      }
    }
    cfg.noise_sigma2 = s.value("noise_sigma2", cfg.noise_sigma2);
    if (s.contains("noise")) {
      const auto name = s["noise"].get<std::string>();
      if (name == "gaussian") {
        cfg.noise_family = simulation::NoiseFamily::Gaussian;
      } else if (name == "student_t") {
        cfg.noise_family = simulation::NoiseFamily::StudentT;
      } else {
        throw ConfigError("unknown noise family '" + name + "'");
      }
    }
    cfg.noise_df = s.value("noise_df", cfg.noise_df);
    if (s.contains("design")) {
      const auto name = s["design"].get<std::string>();
      if (name == "gaussian") {
        cfg.design_family = simulation::DesignFamily::Gaussian;
      } else if (name == "student_t") {
        cfg.design_family = simulation::DesignFamily::StudentT;
      } else {
        throw ConfigError("unknown design family '" + name + "'");
      }
    }
    cfg.design_df = s.value("design_df", cfg.design_df);
    cfg.replications = s.value("replications", cfg.replications);
    if (s.contains("methods")) {
      for (const auto& m : s["methods"]) {
        cfg.methods.push_back(method_from_name(m.get<std::string>()));
      }
    }
    cfg.rls_k = s.value("rls_k", cfg.rls_k);
    cfg.rls_ensemble = s.value("rls_ensemble", cfg.rls_ensemble);
    cfg.ridge_gamma = s.value("ridge_gamma", cfg.ridge_gamma);
    cfg.cv_folds = s.value("cv_folds", cfg.cv_folds);
    cfg.cv_grid = s.value("cv_grid", cfg.cv_grid);
    cfg.alpha = s.value("alpha", cfg.alpha);
    cfg.redraw_design = s.value("redraw_design", cfg.redraw_design);
    cfg.collect_diagnostics =
        s.value("collect_diagnostics", cfg.collect_diagnostics);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("simulate section: ") + e.what());
  }
  return cfg;
}

}  // namespace

RunConfig load_config(const std::string& path,
                      const std::string& subcommand) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  json root;
  try {
    root = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("config '" + path + "': " + e.what());
  }
  reject_unknown_keys(root, "config",
                      {"seed", "out_dir", "simulate", "fit", "diagnose"});

  RunConfig cfg;
  cfg.subcommand = subcommand;
  try {
    cfg.seed = root.value("seed", cfg.seed);
    cfg.out_dir = root.value("out_dir", cfg.out_dir);

    if (subcommand == "simulate") {
      if (!root.contains("simulate")) {
        throw ConfigError("config lacks a 'simulate' section");
      }
      cfg.sim = parse_sim(root["simulate"]);
      cfg.sim.seed = cfg.seed;
    } else if (subcommand == "fit") {
      if (!root.contains("fit")) {
        throw ConfigError("config lacks a 'fit' section");
      }
      const json& f = root["fit"];
      reject_unknown_keys(
          f, "fit",
          {"data", "target", "controls", "transforms", "lags", "intercept",
           "method", "rls_k", "rls_ensemble", "ridge_gamma", "c_k", "c_gamma",
           "alpha", "cv_folds", "cv_grid"});
      cfg.data_path = f.at("data").get<std::string>();
      cfg.target = f.at("target").get<std::string>();
      if (f.contains("controls")) {
        cfg.controls = f["controls"].get<std::vector<std::string>>();
      }
      if (f.contains("transforms")) {
        cfg.transforms = f["transforms"].get<std::vector<int>>();
      }
      cfg.lags = f.value("lags", cfg.lags);
      cfg.add_intercept = f.value("intercept", cfg.add_intercept);
      if (f.contains("method")) {
        cfg.method = method_from_name(f["method"].get<std::string>());
      }
      if (f.contains("rls_k")) cfg.rls_k = f["rls_k"].get<int>();
      cfg.rls_ensemble = f.value("rls_ensemble", cfg.rls_ensemble);
      if (f.contains("ridge_gamma")) {
        cfg.ridge_gamma = f["ridge_gamma"].get<double>();
      }
      cfg.c_k = f.value("c_k", cfg.c_k);
      cfg.c_gamma = f.value("c_gamma", cfg.c_gamma);
      cfg.alpha = f.value("alpha", cfg.alpha);
      cfg.cv_folds = f.value("cv_folds", cfg.cv_folds);
      cfg.cv_grid = f.value("cv_grid", cfg.cv_grid);
    } else if (subcommand == "diagnose") {
      if (root.contains("diagnose")) {
        const json& d = root["diagnose"];
        reject_unknown_keys(d, "diagnose", {"n", "p", "seeds"});
        cfg.diag_n = d.value("n", cfg.diag_n);
        cfg.diag_p = d.value("p", cfg.diag_p);
        cfg.diag_seeds = d.value("seeds", cfg.diag_seeds);
      }
    } else {
      throw ConfigError("unknown subcommand '" + subcommand + "'");
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

void write_file(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write '" + tmp + "'");
    out << contents;
    if (!out) throw Error("short write to '" + tmp + "'");
  }
  std::filesystem::rename(tmp, path);
}

nlohmann::json config_json(const RunConfig& cfg) {
  json j;
  j["version"] = kVersion;
  j["subcommand"] = cfg.subcommand;
  j["seed"] = cfg.seed;
  j["out_dir"] = cfg.out_dir;
  if (cfg.subcommand == "simulate") {
    const auto& s = cfg.sim;
    json sim;
    sim["n"] = s.n;
    sim["p"] = s.p;
    sim["sigma"] = simulation::sigma_kind_name(s.sigma_kind);
    sim["rho"] = s.rho;
    json groups = json::array();
    for (const auto& g : s.signal_groups) {
      groups.push_back({{"b", g.b}, {"count", g.count}});
    }
    sim["signal_groups"] = groups;
    sim["noise_sigma2"] = s.noise_sigma2;
    sim["noise"] = s.noise_family == simulation::NoiseFamily::Gaussian
                       ? "gaussian"
                       : "student_t";
    sim["noise_df"] = s.noise_df;
    sim["design"] = s.design_family == simulation::DesignFamily::Gaussian
                        ? "gaussian"
                        : "student_t";
    sim["design_df"] = s.design_df;
    sim["replications"] = s.replications;
    json methods = json::array();
    for (Method m : s.methods) methods.push_back(method_name(m));
    sim["methods"] = methods;
    sim["rls_k"] = s.rls_k;
    sim["rls_ensemble"] = s.rls_ensemble;
    sim["ridge_gamma"] = s.ridge_gamma;
    sim["cv_folds"] = s.cv_folds;
    sim["cv_grid"] = s.cv_grid;
    sim["alpha"] = s.alpha;
    sim["redraw_design"] = s.redraw_design;
    sim["collect_diagnostics"] = s.collect_diagnostics;
    j["simulate"] = sim;
  } else if (cfg.subcommand == "fit") {
    json f;
    f["data"] = cfg.data_path;
    f["target"] = cfg.target;
    f["controls"] = cfg.controls;
    f["transforms"] = cfg.transforms;
    f["lags"] = cfg.lags;
    f["intercept"] = cfg.add_intercept;
    f["method"] = method_name(cfg.method);
    if (cfg.rls_k) f["rls_k"] = *cfg.rls_k;
    f["rls_ensemble"] = cfg.rls_ensemble;
    if (cfg.ridge_gamma) f["ridge_gamma"] = *cfg.ridge_gamma;
    f["c_k"] = cfg.c_k;
    f["c_gamma"] = cfg.c_gamma;
    f["alpha"] = cfg.alpha;
    f["cv_folds"] = cfg.cv_folds;
    f["cv_grid"] = cfg.cv_grid;
    j["fit"] = f;
  } else if (cfg.subcommand == "diagnose") {
    j["diagnose"] = {{"n", cfg.diag_n},
                     {"p", cfg.diag_p},
                     {"seeds", cfg.diag_seeds}};
  }
  return j;
}

namespace {

std::string out_path(const RunConfig& cfg, const std::string& name) {
  return (std::filesystem::path(cfg.out_dir) / name).string();
}

void write_manifest(const RunConfig& cfg) {
  write_file(out_path(cfg, "manifest.json"), config_json(cfg).dump(2) + "\n");
}

json cell_json(const simulation::CellStats& cell) {
  json j;
  j["method"] = method_name(cell.method);
  j["b"] = cell.b;
  j["count"] = cell.count;
  j["coef"] = cell.mean_coef;
  j["se"] = cell.mean_se;
  j["cr"] = cell.coverage;
  if (std::isfinite(cell.power)) j["power"] = cell.power;
  return j;
}

}  // namespace

void run_simulate(const RunConfig& cfg) {
  std::filesystem::create_directories(cfg.out_dir);
  simulation::ExperimentReport report = simulation::run_experiment(cfg.sim);

  write_file(out_path(cfg, "experiment.csv"), simulation::report_csv(report));

  json j;
  j["replications"] = report.replications;
  j["redraws"] = report.redraws;
  if (std::isfinite(report.mean_sigma2_hat)) {
    j["mean_sigma2_hat"] = report.mean_sigma2_hat;
  }
  if (std::isfinite(report.mean_max_offdiag)) {
    j["mean_max_offdiag"] = report.mean_max_offdiag;
  }
  j["cells"] = json::array();
  for (const auto& cell : report.cells) j["cells"].push_back(cell_json(cell));
  write_file(out_path(cfg, "experiment.json"), j.dump(2) + "\n");
  write_manifest(cfg);
}

void run_fit(const RunConfig& cfg) {
  std::filesystem::create_directories(cfg.out_dir);

  Dataset data = fill_missing(read_csv(cfg.data_path));
  if (!cfg.transforms.empty()) data = apply_transforms(data, cfg.transforms);
  StandardizeResult std_data = standardize(data);
  Dataset table = std_data.data;
  if (cfg.lags > 0) table = build_lags(table, cfg.target, cfg.lags);

  const Eigen::Index n = table.rows();
  const Eigen::Index target_col = table.column_index(cfg.target);
  std::vector<Eigen::Index> control_cols;
  for (const auto& name : cfg.controls) {
    control_cols.push_back(table.column_index(name));
  }
  for (int ell = 1; ell <= cfg.lags; ++ell) {
    control_cols.push_back(
        table.column_index(cfg.target + "_lag" + std::to_string(ell)));
  }

  std::vector<Eigen::Index> predictor_cols;
  std::vector<std::string> predictor_names;
  for (Eigen::Index c = 0; c < table.cols(); ++c) {
    if (c == target_col) continue;
    if (std::find(control_cols.begin(), control_cols.end(), c) !=
        control_cols.end()) {
      continue;
    }
    predictor_cols.push_back(c);
    predictor_names.push_back(table.column_names[c]);
  }
  const Eigen::Index p = static_cast<Eigen::Index>(predictor_cols.size());
  if (p < 2) throw ConfigError("fit: fewer than two predictor columns");

  Eigen::VectorXd y = table.values.col(target_col);
  Eigen::MatrixXd x(n, p);
  for (Eigen::Index c = 0; c < p; ++c) {
    x.col(c) = table.values.col(predictor_cols[static_cast<std::size_t>(c)]);
  }

  int effective_n = static_cast<int>(n);
  const Eigen::Index n_controls =
      static_cast<Eigen::Index>(control_cols.size()) +
      (cfg.add_intercept ? 1 : 0);
  if (n_controls > 0) {
    Eigen::MatrixXd z(n, n_controls);
    Eigen::Index zc = 0;
    if (cfg.add_intercept) z.col(zc++).setOnes();
    for (Eigen::Index c : control_cols) z.col(zc++) = table.values.col(c);
    if (n_controls >= n) {
      throw RankDeficientControls("fit: as many controls as observations");
    }
    // Residualizing alone would leave an n-row design whose Gram has rank
    // n-q, which the estimators reject. Rotating into an orthonormal basis
    // of the complement of col(Z) gives the same regression (identical
    // Gram, fitted values and penalized objectives) on n-q full-rank rows.
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(z);
    Eigen::MatrixXd r_diag = qr.matrixQR()
                                 .topRows(n_controls)
                                 .triangularView<Eigen::Upper>();
    const double r_max = r_diag.diagonal().cwiseAbs().maxCoeff();
    if (r_diag.diagonal().cwiseAbs().minCoeff() <=
        static_cast<double>(n) * 1e-12 * std::max(r_max, 1.0)) {
      throw RankDeficientControls("fit: controls are rank deficient");
    }
    Eigen::MatrixXd q_full =
        qr.householderQ() * Eigen::MatrixXd::Identity(n, n);
    Eigen::MatrixXd q_perp = q_full.rightCols(n - n_controls);
    x = (q_perp.transpose() * x).eval();
    y = (q_perp.transpose() * y).eval();
    effective_n = static_cast<int>(n - n_controls);
  }

  linalg::RngStream base(cfg.seed);
  auto cv_rng = base.child(0);
  auto method_rng = base.child(1);
  lasso::CvLassoResult cv =
      lasso::cv_lasso(x, y, cfg.cv_folds, cfg.cv_grid, cv_rng);
  const double sigma2 = lasso::noise_level(cv.fit, effective_n);

  ApproximateInverse minv = [&]() {
    switch (cfg.method) {
      case Method::MPI: return mpi_inverse(x);
      case Method::RLS: {
        const int k = cfg.rls_k
                          ? *cfg.rls_k
                          : recommended_k(effective_n, static_cast<int>(p),
                                          cfg.c_k);
        return rls_inverse_ensemble(x, k, cfg.rls_ensemble, method_rng);
      }
      case Method::RID: {
        const double gamma =
            cfg.ridge_gamma
                ? *cfg.ridge_gamma
                : recommended_gamma(effective_n, static_cast<int>(p),
                                    cfg.c_gamma);
        return ridge_inverse(x, gamma);
      }
    }
    throw ConfigError("unknown method");
  }();

  OmegaDiagonal omega = omega_diagonal(minv);
  Eigen::VectorXd beta_c = inference::debias(minv, x, y, cv.fit.beta);
  inference::DebiasedFit fit = inference::confidence_intervals(
      beta_c, omega.values, sigma2, effective_n, cfg.alpha, cfg.method);
  const Eigen::VectorXd se = fit.standard_errors(effective_n);
  const std::vector<int> significant = inference::significant_set(fit);

  std::ostringstream coef;
  coef.precision(10);
  coef << "index,name,coef,se,ci_lo,ci_hi,significant\n";
  std::vector<char> is_sig(static_cast<std::size_t>(p), 0);
  for (int j : significant) is_sig[static_cast<std::size_t>(j)] = 1;
  for (Eigen::Index j = 0; j < p; ++j) {
    coef << j << ',' << predictor_names[static_cast<std::size_t>(j)] << ','
         << beta_c(j) << ',' << se(j) << ',' << fit.ci_lower(j) << ','
         << fit.ci_upper(j) << ','
         << (is_sig[static_cast<std::size_t>(j)] ? 1 : 0) << '\n';
  }
  write_file(out_path(cfg, "coefficients.csv"), coef.str());

  std::ostringstream sig;
  sig.precision(10);
  sig << "index,name,coef,se,ci_lo,ci_hi\n";
  for (int j : significant) {
    sig << j << ',' << predictor_names[static_cast<std::size_t>(j)] << ','
        << beta_c(j) << ',' << se(j) << ',' << fit.ci_lower(j) << ','
        << fit.ci_upper(j) << '\n';
  }
  write_file(out_path(cfg, "significant.csv"), sig.str());
  write_manifest(cfg);
}

void run_diagnose(const RunConfig& cfg) {
  std::filesystem::create_directories(cfg.out_dir);
  linalg::RngStream base(cfg.seed);
  json j;

  {  // Small-penalty ridge must coincide with the pseudoinverse.
    auto rng = base.child(0);
    double worst = 0.0;
    for (int rep = 0; rep < 10; ++rep) {
      Eigen::MatrixXd x = linalg::sample_gaussian_matrix(10, 30, rng);
      ApproximateInverse mpi = mpi_inverse(x);
      ApproximateInverse rid = ridge_inverse(x, 1e-8 * 30.0);
      worst = std::max(worst, (rid.m - mpi.m).norm() / mpi.m.norm());
    }
    j["ridge_limit"] = {{"max_relative_distance", worst},
                        {"tolerance", 1e-6},
                        {"pass", worst <= 1e-6}};
  }

  {  // Shared-D variance ordering across the three estimators.
    auto rng = base.child(1);
    auto design_rng = rng.child(0);
    Eigen::MatrixXd x =
        linalg::sample_gaussian_matrix(cfg.diag_n, cfg.diag_p, design_rng);
    auto check_rng = rng.child(1);
    const int k = recommended_k(cfg.diag_n, cfg.diag_p, 1.0);
    const double gamma = recommended_gamma(cfg.diag_n, cfg.diag_p, 1.0);
    simulation::VarianceOrderingReport rep =
        simulation::check_variance_ordering(x, k, gamma, Method::MPI, 200,
                                            check_rng);
    const double rls_tol = 1e-3 * rep.median_omega_mpi;
    const double rid_tol = 1e-12 * rep.median_omega_mpi;
    j["variance_ordering"] = {
        {"n", cfg.diag_n},
        {"p", cfg.diag_p},
        {"k", k},
        {"gamma", gamma},
        {"max_rls_minus_mpi", rep.max_rls_minus_mpi},
        {"max_rid_minus_mpi", rep.max_rid_minus_mpi},
        {"median_omega_mpi", rep.median_omega_mpi},
        {"own_d_max_rls_minus_mpi", rep.own_d_max_rls_minus_mpi},
        {"own_d_max_rid_minus_mpi", rep.own_d_max_rid_minus_mpi},
        {"pass", rep.max_rls_minus_mpi <= rls_tol &&
                     rep.max_rid_minus_mpi <= rid_tol}};
  }

  {  // The off-diagonal bias bound should track sqrt(log p / n).
    auto rng = base.child(2);
    simulation::BiasScaleReport rep = simulation::check_bias_scale(
        {{50, 100}, {100, 200}, {200, 400}}, cfg.diag_seeds,
        simulation::SigmaKind::Identity, 0.0, rng);
    json points = json::array();
    for (const auto& pt : rep.points) {
      points.push_back(
          {{"n", pt.n}, {"p", pt.p}, {"median_ratio", pt.median_ratio}});
    }
    j["bias_scale"] = {{"points", points},
                       {"max_relative_spread", rep.max_relative_spread},
                       {"tolerance", 0.2},
                       {"pass", rep.max_relative_spread < 0.2}};
  }

  bool all_pass = true;
  for (const char* key : {"ridge_limit", "variance_ordering", "bias_scale"}) {
    all_pass = all_pass && j[key]["pass"].get<bool>();
  }
  j["pass"] = all_pass;
  write_file(out_path(cfg, "diagnostics.json"), j.dump(2) + "\n");
  write_manifest(cfg);
}

}  // namespace hdinfer::app

// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "hdinfer/simulation.hpp"

namespace hdinfer::app {

/// Rectangular numeric table. Missing cells are NaN until fill_missing.
struct Dataset {
  std::vector<std::string> column_names;
  Eigen::MatrixXd values;
  std::vector<std::string> row_labels;  // empty when the file has none

  Eigen::Index rows() const { return values.rows(); }
  Eigen::Index cols() const { return values.cols(); }
  Eigen::Index column_index(const std::string& name) const;
};

/// CSV reader: first row headers, empty cell or "NA" means missing, dot
/// decimal regardless of locale. A non-numeric first column is treated as
/// row labels.
Dataset read_csv(const std::string& path);

/// Replaces each missing value by the most recent prior value in its column.
Dataset fill_missing(const Dataset& data);

struct StandardizeResult {
  Dataset data;
  Eigen::VectorXd means;
  Eigen::VectorXd sds;  // population convention: divisor n
};

StandardizeResult standardize(const Dataset& data);

/// Per-column transform codes: 1 level, 2 first difference, 4 log,
/// 5 log first difference. Drops the first row whenever any column
/// differences.
Dataset apply_transforms(const Dataset& data, const std::vector<int>& codes);

/// Appends lag-1..lag-L copies of `column` and drops the first L rows.
Dataset build_lags(const Dataset& data, const std::string& column, int lags);

struct RunConfig {
  std::string subcommand;  // simulate | fit | diagnose
  std::uint64_t seed = 0;
  std::string out_dir = ".";

  // fit
  std::string data_path;
  std::string target;
  std::vector<std::string> controls;  // partialled out together with lags
  std::vector<int> transforms;        // optional, one code per column
  int lags = 0;
  bool add_intercept = true;
  Method method = Method::MPI;
  std::optional<int> rls_k;
  int rls_ensemble = 1000;
  std::optional<double> ridge_gamma;
  double c_k = 1.0;      // used when rls_k is unset
  double c_gamma = 1.0;  // used when ridge_gamma is unset
  double alpha = 0.05;
  int cv_folds = 10;
  int cv_grid = 100;

  // simulate
  simulation::SimulationConfig sim;

  // diagnose
  int diag_n = 50;
  int diag_p = 100;
  int diag_seeds = 20;
};

/// Parses the JSON config file; `subcommand` selects which sections apply.
/// Unknown keys raise ConfigError.
RunConfig load_config(const std::string& path, const std::string& subcommand);

/// Atomic file write: temp file in the same directory, then rename.
void write_file(const std::string& path, const std::string& contents);

/// simulate: writes experiment.csv, experiment.json, manifest.json.
void run_simulate(const RunConfig& config);

/// fit: read -> fill -> (transforms) -> standardize -> lags -> partial out
/// controls -> CV-lasso init -> approximate inverse -> debias -> intervals.
/// Writes coefficients.csv, significant.csv, manifest.json.
void run_fit(const RunConfig& config);

/// diagnose: ridge gamma->0 limit, shared-D variance ordering, bias-bound
/// scale flatness. Writes diagnostics.json, manifest.json.
void run_diagnose(const RunConfig& config);

/// Resolved config as JSON, embedded in every manifest.
nlohmann::json config_json(const RunConfig& config);

}  // namespace hdinfer::app

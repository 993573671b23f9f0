// SPDX-License-Identifier: Apache-2.0
//
// Command line front end: `hdinfer {simulate,fit,diagnose} --config FILE`.
// Exit codes: 0 success, 2 configuration error, 3 data error, 4 numerical
// failure.
#include <cstdint>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "hdinfer/app.hpp"

namespace {

int dispatch(const std::string& subcommand, const std::string& config_path,
             const std::optional<std::uint64_t>& seed,
             const std::optional<std::string>& out_dir,
             const std::optional<std::string>& method,
             const std::optional<double>& alpha) {
  using namespace hdinfer;
  app::RunConfig cfg = app::load_config(config_path, subcommand);
  if (seed) {
    cfg.seed = *seed;
    cfg.sim.seed = *seed;
  }
  if (out_dir) cfg.out_dir = *out_dir;
  if (method) {
    cfg.method = method_from_name(*method);
    cfg.sim.methods = {cfg.method};
  }
  if (alpha) {
    cfg.alpha = *alpha;
    cfg.sim.alpha = *alpha;
  }

  if (subcommand == "simulate") {
    app::run_simulate(cfg);
  } else if (subcommand == "fit") {
    app::run_fit(cfg);
  } else {
    app::run_diagnose(cfg);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App cli{"Debiased high-dimensional regression toolkit"};
  cli.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out_dir;
  std::optional<std::string> method;
  std::optional<double> alpha;

  for (const char* name : {"simulate", "fit", "diagnose"}) {
    CLI::App* sub = cli.add_subcommand(name);
    sub->add_option("--config", config_path, "JSON configuration file")
        ->required();
    sub->add_option("--seed", seed, "override the config seed");
    sub->add_option("--out-dir", out_dir, "override the output directory");
    sub->add_option("--method", method, "mpi, rls or rid");
    sub->add_option("--alpha", alpha, "significance level in (0,1)");
  }

  try {
    cli.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = cli.exit(e);
    return rc == 0 ? 0 : 2;
  }

  const std::string subcommand = cli.get_subcommands().front()->get_name();
  using namespace hdinfer;
  try {
    return dispatch(subcommand, config_path, seed, out_dir, method, alpha);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const InvalidAlpha& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const InvalidConstant& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const ParseError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const RaggedRows& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const LeadingMissing& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const ConstantColumn& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const InsufficientRows& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    std::cerr << "numerical failure: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
}

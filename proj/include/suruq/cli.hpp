#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace suruq {

/// File paths, fit and propagation options shared by the CLI subcommands.
/// Defaults match the command-line defaults.
struct RunConfig {
  std::string train_inputs_path;
  std::string train_outputs_path;
  std::string input_posterior_path;
  std::string artifact_path;
  std::string output_path;
  std::string spec_path;    // explicit basis-spec JSON; overrides degree
  std::string kernel_path;  // kernel JSON enabling the GPR route
  std::string theta_grid_path;

  int degree = 2;
  std::vector<double> domain;  // flattened lo,hi pairs; empty = from data
  double epsilon = 1e-3;
  bool include_surrogate = true;
  std::uint64_t seed = 0;
  int threads = 1;

  std::vector<int> degrees;  // evidence ranking candidates

  int demo_n_samples = 100;
  int demo_n_times = 50;
  int demo_n_sites = 2;
  int demo_n_posterior = 4096;

  long verify_mc_draws = 200000;
};

/// Exit codes: 0 success, 1 usage error, 2 numerical/contract error.
int cmd_fit(const RunConfig& config, std::ostream& out);
int cmd_evidence(const RunConfig& config, std::ostream& out);
int cmd_propagate(const RunConfig& config, std::ostream& out);
int cmd_trust(const RunConfig& config, std::ostream& out);
int cmd_demo(const RunConfig& config, std::ostream& out);
int cmd_verify(const RunConfig& config, std::ostream& out);

}  // namespace suruq

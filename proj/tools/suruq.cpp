#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "suruq/cli.hpp"

namespace {

void add_common(CLI::App* cmd, suruq::RunConfig& config) {
  cmd->add_option("--threads", config.threads, "Worker thread count")
      ->envname("SURUQ_THREADS")
      ->check(CLI::PositiveNumber);
  cmd->add_option("--seed", config.seed, "Random seed");
}

void add_training(CLI::App* cmd, suruq::RunConfig& config, bool required) {
  auto* in = cmd->add_option("--train-inputs", config.train_inputs_path,
                             "Training inputs CSV (one column per parameter)");
  auto* out = cmd->add_option("--train-outputs", config.train_outputs_path,
                              "Training outputs CSV (wide or sample,site,time,value)");
  if (required) {
    in->required();
    out->required();
  }
}

void add_spec(CLI::App* cmd, suruq::RunConfig& config) {
  cmd->add_option("--degree", config.degree, "Total polynomial degree")
      ->check(CLI::NonNegativeNumber);
  cmd->add_option("--spec", config.spec_path, "Explicit basis-spec JSON path");
  cmd->add_option("--domain", config.domain,
                  "Domain box as lo,hi pairs (default: data range +1% per side)")
      ->delimiter(',');
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian linear surrogates with surrogate-uncertainty propagation"};
  app.require_subcommand(1);

  suruq::RunConfig config;

  auto* fit = app.add_subcommand("fit", "Fit a surrogate and write the posterior artifact");
  add_training(fit, config, true);
  add_spec(fit, config);
  fit->add_option("--artifact", config.artifact_path, "Output artifact JSON")->required();
  add_common(fit, config);

  auto* evidence =
      app.add_subcommand("evidence", "Rank candidate polynomial degrees by evidence");
  add_training(evidence, config, true);
  evidence->add_option("--degrees", config.degrees, "Candidate degrees")
      ->required()
      ->delimiter(',');
  evidence->add_option("--out", config.output_path, "Ranking CSV output path");
  evidence->add_option("--domain", config.domain,
                       "Domain box as lo,hi pairs (default: data range +1% per side)")
      ->delimiter(',');
  add_common(evidence, config);

  auto* propagate = app.add_subcommand(
      "propagate", "Propagate an input posterior through a fitted surrogate");
  propagate->add_option("--artifact", config.artifact_path, "Posterior artifact JSON");
  add_training(propagate, config, false);
  add_spec(propagate, config);
  propagate
      ->add_option("--input-posterior", config.input_posterior_path,
                   "Input posterior CSV (parameter columns + optional __weight)")
      ->required();
  propagate->add_option("--out", config.output_path, "Propagation CSV output")->required();
  propagate->add_option("--epsilon", config.epsilon, "Trust threshold")
      ->check(CLI::PositiveNumber);
  propagate->add_flag("--no-surrogate,!--surrogate", [&config](std::int64_t count) {
    config.include_surrogate = count == 0;
  },
                      "Drop the surrogate-uncertainty term");
  propagate->add_option("--kernel", config.kernel_path, "Kernel JSON (GPR route)");
  propagate->add_option("--theta-grid", config.theta_grid_path,
                        "Kernel grid JSON for hyperparameter marginalization");
  add_common(propagate, config);

  auto* trust =
      app.add_subcommand("trust", "Trustworthiness ratio of a fitted surrogate");
  trust->add_option("--artifact", config.artifact_path, "Posterior artifact JSON")
      ->required();
  trust
      ->add_option("--input-posterior", config.input_posterior_path,
                   "Input posterior CSV")
      ->required();
  trust->add_option("--epsilon", config.epsilon, "Trust threshold")
      ->check(CLI::PositiveNumber);
  trust->add_option("--out", config.output_path, "Trust table CSV output");
  add_common(trust, config);

  auto* demo = app.add_subcommand(
      "demo", "Synthetic end-to-end pipeline with plot-ready uncertainty bands");
  demo->add_option("--out", config.output_path, "Band CSV output")->required();
  demo->add_option("--n-samples", config.demo_n_samples, "Training sample count")
      ->check(CLI::PositiveNumber);
  demo->add_option("--n-times", config.demo_n_times, "Time instances")
      ->check(CLI::PositiveNumber);
  demo->add_option("--n-sites", config.demo_n_sites, "Measurement sites")
      ->check(CLI::PositiveNumber);
  demo->add_option("--n-posterior", config.demo_n_posterior,
                   "Input-posterior sample count")
      ->check(CLI::PositiveNumber);
  demo->add_option("--epsilon", config.epsilon, "Trust threshold")
      ->check(CLI::PositiveNumber);
  add_common(demo, config);

  auto* verify = app.add_subcommand(
      "verify", "Re-certify the closed forms against brute-force oracles");
  verify->add_option("--mc-draws", config.verify_mc_draws, "Monte Carlo draw count")
      ->check(CLI::PositiveNumber);
  verify->add_option("--out", config.output_path, "Report JSON output path");
  add_common(verify, config);

  CLI11_PARSE(app, argc, argv);

  if (fit->parsed()) return suruq::cmd_fit(config, std::cout);
  if (evidence->parsed()) return suruq::cmd_evidence(config, std::cout);
  if (propagate->parsed()) return suruq::cmd_propagate(config, std::cout);
  if (trust->parsed()) return suruq::cmd_trust(config, std::cout);
  if (demo->parsed()) return suruq::cmd_demo(config, std::cout);
  if (verify->parsed()) return suruq::cmd_verify(config, std::cout);
  return 1;
}

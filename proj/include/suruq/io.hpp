#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "suruq/gpr.hpp"
#include "suruq/propagate.hpp"
#include "suruq/surrogate.hpp"

namespace suruq {

/// One double formatted with 17 significant digits, '.' separator, no
/// locale dependence; round-trips exactly.
std::string format_double(double v);

struct NumericCsv {
  std::vector<std::string> columns;
  Eigen::MatrixXd values;
};

/// Comma-separated numeric table with a header line. Parse failures and
/// non-finite entries throw ParseError naming path, line, and column.
NumericCsv read_numeric_csv(const std::string& path);

/// Training observables. Wide format: one column per site (or flattened
/// site-time) label. Long format, detected by the exact header
/// sample,site,time,value: rows are normalized onto the compound column
/// index flatten_spacetime(site, time), labels become "<site>@<time>".
struct OutputData {
  Eigen::MatrixXd values;  // N_s x (n_sites * n_times)
  std::vector<std::string> labels;
  int n_sites = 0;
  int n_times = 1;
};
OutputData read_outputs_csv(const std::string& path);

Eigen::MatrixXd read_inputs_csv(const std::string& path,
                                std::vector<std::string>* names = nullptr);

/// N_a named parameter columns plus an optional __weight column (uniform
/// weights when absent).
InputPosterior read_input_posterior_csv(const std::string& path);

void write_propagation_csv(const std::string& path,
                           const std::vector<std::string>& site_labels,
                           const PropagationResult& result);

nlohmann::json basis_spec_to_json(const BasisSpec& spec);
BasisSpec basis_spec_from_json(const nlohmann::json& j);

/// Posterior artifact, format_version 1. The full symmetric H matrix is
/// stored; readers re-factorize it and verify positive definiteness.
void write_posterior_artifact(const std::string& path, const CoefficientPosterior& post);
CoefficientPosterior read_posterior_artifact(const std::string& path);

nlohmann::json kernel_to_json(const Kernel& kernel);
Kernel kernel_from_json(const nlohmann::json& j);
ThetaGrid theta_grid_from_json(const nlohmann::json& j);

nlohmann::json load_json_file(const std::string& path);

}  // namespace suruq

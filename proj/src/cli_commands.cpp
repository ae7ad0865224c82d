#include "suruq/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <limits>
#include <ostream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "suruq/gpr.hpp"
#include "suruq/io.hpp"
#include "suruq/oracle.hpp"
#include "suruq/propagate.hpp"
#include "suruq/rng.hpp"
#include "suruq/surrogate.hpp"

namespace suruq {

namespace {

using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumerical = 2;

[[noreturn]] void usage_error(const std::string& what) {
  throw std::invalid_argument(what);
}

std::vector<Interval> domain_from_data(const Eigen::MatrixXd& inputs) {
  std::vector<Interval> domain;
  domain.reserve(static_cast<size_t>(inputs.cols()));
  for (Eigen::Index c = 0; c < inputs.cols(); ++c) {
    const double lo = inputs.col(c).minCoeff();
    const double hi = inputs.col(c).maxCoeff();
    if (!(hi > lo)) {
      std::ostringstream msg;
      msg << "input column " << c
          << " is constant; cannot derive a domain box (pass --domain explicitly)";
      throw ContractError(msg.str());
    }
    const double pad = 0.01 * (hi - lo);
    domain.push_back({lo - pad, hi + pad});
  }
  return domain;
}

std::vector<Interval> domain_from_flat(const std::vector<double>& flat) {
  if (flat.empty() || flat.size() % 2 != 0)
    usage_error("--domain needs an even number of values: lo1,hi1,lo2,hi2,...");
  std::vector<Interval> domain;
  for (size_t k = 0; k + 1 < flat.size(); k += 2) domain.push_back({flat[k], flat[k + 1]});
  return domain;
}

BasisSpec spec_for(const RunConfig& config, int degree, const Eigen::MatrixXd& inputs) {
  if (!config.spec_path.empty())
    return basis_spec_from_json(load_json_file(config.spec_path));
  const std::vector<Interval> domain = config.domain.empty()
                                           ? domain_from_data(inputs)
                                           : domain_from_flat(config.domain);
  if (static_cast<Eigen::Index>(domain.size()) != inputs.cols())
    usage_error("--domain entries do not match the number of input columns");
  return make_total_degree_spec(degree, domain);
}

TrainingSet load_training(const RunConfig& config) {
  if (config.train_inputs_path.empty() || config.train_outputs_path.empty())
    usage_error("training inputs and outputs CSV paths are required");
  TrainingSet training;
  training.inputs = read_inputs_csv(config.train_inputs_path);
  OutputData outputs = read_outputs_csv(config.train_outputs_path);
  training.outputs = std::move(outputs.values);
  training.site_labels = std::move(outputs.labels);
  if (training.inputs.rows() != training.outputs.rows()) {
    std::ostringstream msg;
    msg << "row counts differ: " << config.train_inputs_path << " has "
        << training.inputs.rows() << ", " << config.train_outputs_path << " has "
        << training.outputs.rows();
    throw ContractError(msg.str());
  }
  return training;
}

std::string short_status(const std::string& message) {
  if (message == "ok") return "ok";
  if (message.find("evidence undefined") != std::string::npos)
    return "evidence-undefined";
  if (message.find("underdetermined") != std::string::npos) return "underdetermined";
  if (message.find("degenerate") != std::string::npos)
    return "interpolation-degenerate";
  if (message.find("singular") != std::string::npos) return "singular-design";
  return message;
}

std::string quote_csv_cell(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

int run_guarded(const std::function<int(std::ostream&)>& body, std::ostream& out) {
  try {
    return body(out);
  } catch (const std::invalid_argument& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitNumerical;
  }
}

}  // namespace

int cmd_fit(const RunConfig& config, std::ostream& out_stream) {
  return run_guarded(
      [&](std::ostream& out) {
        if (config.artifact_path.empty())
          usage_error("fit: --artifact output path is required");
        const TrainingSet training = load_training(config);
        const BasisSpec spec = spec_for(config, config.degree, training.inputs);
        const CoefficientPosterior post = fit(training, spec);
        write_posterior_artifact(config.artifact_path, post);

        out << "fit: N_s=" << post.dims.n_s << " N_p=" << post.dims.n_p
            << " N_x=" << post.dims.n_x << "\n";
        out << "chi2_min = " << format_double(post.chi2_min) << "\n";
        if (post.sigma2_hat)
          out << "sigma2_hat = " << format_double(*post.sigma2_hat) << "\n";
        else
          out << "sigma2_hat = undefined ((N_s-N_p)*N_x - 2 = "
              << post.dims.sigma2_denominator() << " <= 0)\n";
        out << "condition estimate = " << format_double(post.condition_estimate) << "\n";
        out << "dof: (N_s-N_p)*N_x - 2 = " << post.dims.sigma2_denominator()
            << (post.covariance_defined() ? " (covariance defined)"
                                          : " (covariance undefined)")
            << "\n";
        out << "artifact written to " << config.artifact_path << "\n";
        return kExitOk;
      },
      out_stream);
}

int cmd_evidence(const RunConfig& config, std::ostream& out_stream) {
  return run_guarded(
      [&](std::ostream& out) {
        if (config.degrees.empty())
          usage_error("evidence: --degrees list is required");
        const TrainingSet training = load_training(config);

        std::vector<BasisSpec> specs;
        specs.reserve(config.degrees.size());
        for (int degree : config.degrees)
          specs.push_back(spec_for(config, degree, training.inputs));

        std::vector<ModelComparison> rows;
        if (specs.size() == 1) {
          ModelComparison row;
          row.spec_id = 0;
          row.n_basis = specs[0].n_basis();
          try {
            row.log_evidence = log_evidence(training, specs[0]).log_evidence;
            row.posterior_prob = 1.0;
            row.status = "ok";
          } catch (const Error& e) {
            row.status = e.what();
          }
          rows.push_back(std::move(row));
        } else {
          rows = compare_models(training, specs);
        }

        std::ostringstream table;
        table << "degree,n_p,log_evidence,posterior_prob,status\n";
        for (const auto& row : rows) {
          table << config.degrees[static_cast<size_t>(row.spec_id)] << "," << row.n_basis
                << ","
                << (row.log_evidence ? format_double(*row.log_evidence) : "nan") << ","
                << format_double(row.posterior_prob) << ","
                << quote_csv_cell(short_status(row.status)) << "\n";
        }
        out << table.str();
        if (!config.output_path.empty()) {
          std::ofstream file(config.output_path);
          if (!file)
            throw ParseError(config.output_path + ": cannot open file for writing");
          file << table.str();
        }
        return kExitOk;
      },
      out_stream);
}

namespace {

int propagate_with_posterior(const RunConfig& config, const CoefficientPosterior& post,
                             std::ostream& out) {
  const InputPosterior input = read_input_posterior_csv(config.input_posterior_path);
  const BasisMoments moments = basis_moments(post.spec, input, config.threads);
  const PropagationResult result =
      propagate_covariance(post, moments, config.include_surrogate, config.epsilon);
  if (config.output_path.empty()) usage_error("propagate: --out path is required");
  write_propagation_csv(config.output_path, post.site_labels, result);
  out << "propagated " << post.dims.n_x << " sites over " << input.n_samples()
      << " input samples";
  if (moments.n_clamped > 0)
    out << " (" << moments.n_clamped << " clamped to the domain)";
  out << "\n";
  out << "result written to " << config.output_path << "\n";
  if (config.include_surrogate && !result.surrogate_defined) {
    std::cerr << "error: " << result.surrogate_status << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}

int propagate_with_gpr(const RunConfig& config, std::ostream& out) {
  const TrainingSet training = load_training(config);
  const BasisSpec spec = spec_for(config, config.degree, training.inputs);
  const InputPosterior input = read_input_posterior_csv(config.input_posterior_path);
  if (config.output_path.empty()) usage_error("propagate: --out path is required");

  if (!config.theta_grid_path.empty()) {
    const ThetaGrid grid = theta_grid_from_json(load_json_file(config.theta_grid_path));
    const MixturePropagation mix = marginalize_theta_propagate(training, spec, grid, input);
    std::ofstream file(config.output_path);
    if (!file) throw ParseError(config.output_path + ": cannot open file for writing");
    file << "site,mean,var_naive,var_total,surrogate_term,surrogate_share,trust_ratio,"
            "trustworthy\n";
    const auto labels = training.labels();
    for (int x = 0; x < training.n_sites(); ++x) {
      const double surr = mix.surrogate_term + mix.theta_spread(x, x);
      const double second =
          mix.cov_naive(x, x) + mix.theta_spread(x, x) + mix.mean[x] * mix.mean[x];
      const double ratio = second > 0.0 ? surr / second
                           : surr == 0.0 ? 0.0
                                         : std::numeric_limits<double>::infinity();
      file << quote_csv_cell(labels[static_cast<size_t>(x)]) << ","
           << format_double(mix.mean[x]) << "," << format_double(mix.cov_naive(x, x))
           << "," << format_double(mix.cov_total(x, x)) << "," << format_double(surr)
           << "," << format_double(mix.surrogate_share[x]) << ","
           << format_double(ratio) << "," << (ratio < config.epsilon ? 1 : 0) << "\n";
    }
    out << "theta-mixture propagation over " << grid.points.size() << " kernels ("
        << mix.n_dropped << " dropped) written to " << config.output_path << "\n";
    return kExitOk;
  }

  const Kernel kernel = kernel_from_json(load_json_file(config.kernel_path));
  const GprPosterior post = fit_gpr(training, spec, kernel);
  const PropagationResult result =
      propagate_gpr(post, input, config.include_surrogate, config.epsilon);
  write_propagation_csv(config.output_path, post.site_labels, result);
  out << "gpr propagation written to " << config.output_path << "\n";
  if (config.include_surrogate && !result.surrogate_defined) {
    std::cerr << "error: " << result.surrogate_status << "\n";
    return kExitNumerical;
  }
  return kExitOk;
}

}  // namespace

int cmd_propagate(const RunConfig& config, std::ostream& out_stream) {
  return run_guarded(
      [&](std::ostream& out) {
        if (config.input_posterior_path.empty())
          usage_error("propagate: --input-posterior path is required");
        if (!config.kernel_path.empty() || !config.theta_grid_path.empty())
          return propagate_with_gpr(config, out);
        if (!config.artifact_path.empty()) {
          const CoefficientPosterior post =
              read_posterior_artifact(config.artifact_path);
          return propagate_with_posterior(config, post, out);
        }
        // No artifact: fit in one pass from the training CSVs.
        const TrainingSet training = load_training(config);
        const BasisSpec spec = spec_for(config, config.degree, training.inputs);
        return propagate_with_posterior(config, fit(training, spec), out);
      },
      out_stream);
}

int cmd_trust(const RunConfig& config, std::ostream& out_stream) {
  return run_guarded(
      [&](std::ostream& out) {
        if (config.artifact_path.empty())
          usage_error("trust: --artifact path is required");
        if (config.input_posterior_path.empty())
          usage_error("trust: --input-posterior path is required");
        const CoefficientPosterior post = read_posterior_artifact(config.artifact_path);
        const InputPosterior input =
            read_input_posterior_csv(config.input_posterior_path);
        const BasisMoments moments = basis_moments(post.spec, input, config.threads);
        const TrustReport report = trust_ratio(post, moments, config.epsilon);

        std::ostringstream table;
        table << "site,trust_ratio,trust_ratio_centered,trustworthy,epsilon\n";
        for (int x = 0; x < post.dims.n_x; ++x)
          table << quote_csv_cell(post.site_labels[static_cast<size_t>(x)]) << ","
                << format_double(report.ratio[x]) << ","
                << format_double(report.ratio_centered[x]) << ","
                << (report.trustworthy[static_cast<size_t>(x)] ? 1 : 0) << ","
                << format_double(config.epsilon) << "\n";
        out << table.str();
        if (!config.output_path.empty()) {
          std::ofstream file(config.output_path);
          if (!file)
            throw ParseError(config.output_path + ": cannot open file for writing");
          file << table.str();
        }
        return kExitOk;
      },
      out_stream);
}

int cmd_demo(const RunConfig& config, std::ostream& out_stream) {
  return run_guarded(
      [&](std::ostream& out) {
        if (config.output_path.empty()) usage_error("demo: --out path is required");
        const int n_s = config.demo_n_samples;
        const int n_t = config.demo_n_times;
        const int n_sites = config.demo_n_sites;
        if (n_t < 2) usage_error("demo: needs at least two time instances");
        if (n_sites < 1 || n_sites > 4)
          usage_error("demo: supports 1 to 4 sites");

        const std::vector<Interval> box(4, Interval{-1.0, 1.0});
        const BasisSpec spec = make_total_degree_spec(2, box);
        if (n_s < spec.n_basis()) {
          std::ostringstream msg;
          msg << "underdetermined demo: " << n_s << " samples for " << spec.n_basis()
              << " basis functions";
          throw UnderdeterminedError(msg.str());
        }

        // Sign-symmetric training design: stratified magnitudes assigned by
        // Latin-square rotation, each base point expanded to its full 2^4
        // sign orbit, remainder filled with antithetic pairs. The symmetry
        // keeps odd-degree misfit out of the even-degree fit and the
        // stratification keeps the design well conditioned.
        Rng train_rng(config.seed);
        Eigen::MatrixXd inputs(n_s, 4);
        {
          int row = 0;
          const int n_orbits = n_s / 16;
          if (n_orbits > 0) {
            Eigen::VectorXd radii(n_orbits);
            for (int i = 0; i < n_orbits; ++i)
              radii[i] = (i + 0.2 + 0.6 * train_rng.uniform()) / n_orbits;
            for (int i = 0; i < n_orbits; ++i)
              for (int mask = 0; mask < 16; ++mask) {
                for (int k = 0; k < 4; ++k) {
                  const double sign = (mask >> k) & 1 ? -1.0 : 1.0;
                  inputs(row, k) = sign * radii[(i + k) % n_orbits];
                }
                ++row;
              }
          }
          while (row + 2 <= n_s) {
            for (int k = 0; k < 4; ++k) {
              inputs(row, k) = 2.0 * train_rng.uniform() - 1.0;
              inputs(row + 1, k) = -inputs(row, k);
            }
            row += 2;
          }
          for (; row < n_s; ++row)
            for (int k = 0; k < 4; ++k) inputs(row, k) = 2.0 * train_rng.uniform() - 1.0;
        }

        // Site s sees the toy response with the parameter vector rotated by
        // s positions, so each site is a distinct but equally structured
        // observable.
        TrainingSet training;
        training.inputs = inputs;
        training.outputs.resize(n_s, static_cast<Eigen::Index>(n_sites) * n_t);
        for (int i = 0; i < n_s; ++i) {
          for (int site = 0; site < n_sites; ++site) {
            Eigen::Vector4d a;
            for (int k = 0; k < 4; ++k) a[k] = inputs(i, (k + site) % 4);
            for (int t = 0; t < n_t; ++t)
              training.outputs(i, flatten_spacetime(n_sites, n_t, site, t)) =
                  toy_simulator(a, t, n_t);
          }
        }
        training.site_labels.reserve(static_cast<size_t>(n_sites) * n_t);
        for (int site = 0; site < n_sites; ++site)
          for (int t = 0; t < n_t; ++t)
            training.site_labels.push_back("s" + std::to_string(site) + "@t" +
                                           std::to_string(t));

        const CoefficientPosterior post = fit(training, spec);

        Rng post_rng(config.seed + 1000003ULL);
        Eigen::MatrixXd atoms(config.demo_n_posterior, 4);
        for (int j = 0; j < config.demo_n_posterior; ++j)
          for (int k = 0; k < 4; ++k) atoms(j, k) = 2.0 * post_rng.uniform() - 1.0;
        const InputPosterior input = InputPosterior::uniform(std::move(atoms));
        const BasisMoments moments = basis_moments(spec, input, config.threads);
        const PropagationResult result =
            propagate_covariance(post, moments, config.include_surrogate, config.epsilon);

        std::ofstream file(config.output_path);
        if (!file) throw ParseError(config.output_path + ": cannot open file for writing");
        file << "site,time,mean,sd_naive,sd_total,naive_lo,naive_hi,total_lo,total_hi,"
                "surrogate_share,trust_ratio,trustworthy\n";
        for (int site = 0; site < n_sites; ++site)
          for (int t = 0; t < n_t; ++t) {
            const int col = flatten_spacetime(n_sites, n_t, site, t);
            const double sd_naive = std::sqrt(std::max(result.cov_naive(col, col), 0.0));
            const double sd_total = std::sqrt(std::max(result.cov_total(col, col), 0.0));
            const double mean = result.mean[col];
            file << site << "," << t << "," << format_double(mean) << ","
                 << format_double(sd_naive) << "," << format_double(sd_total) << ","
                 << format_double(mean - sd_naive) << ","
                 << format_double(mean + sd_naive) << ","
                 << format_double(mean - sd_total) << ","
                 << format_double(mean + sd_total) << ","
                 << format_double(result.surrogate_share[col]) << ","
                 << format_double(result.trust_ratio[col]) << ","
                 << (result.trustworthy[static_cast<size_t>(col)] ? 1 : 0) << "\n";
          }

        auto median_share = [&](int t_begin, int t_end) {
          std::vector<double> shares;
          for (int site = 0; site < n_sites; ++site)
            for (int t = t_begin; t < t_end; ++t)
              shares.push_back(
                  result.surrogate_share[flatten_spacetime(n_sites, n_t, site, t)]);
          std::sort(shares.begin(), shares.end());
          const size_t n = shares.size();
          return n % 2 == 1 ? shares[n / 2]
                            : 0.5 * (shares[n / 2 - 1] + shares[n / 2]);
        };
        const int quartile = n_t / 4;
        out << "demo: N_s=" << n_s << " sites=" << n_sites << " N_t=" << n_t
            << " (columns " << post.dims.n_x << ")\n";
        out << "chi2_min = " << format_double(post.chi2_min) << ", sigma2_hat = "
            << (post.sigma2_hat ? format_double(*post.sigma2_hat) : "undefined")
            << "\n";
        out << "surrogate_term = " << format_double(result.surrogate_term) << "\n";
        out << "median surrogate_share, first time-quartile = "
            << format_double(median_share(0, quartile)) << "\n";
        out << "median surrogate_share, last time-quartile  = "
            << format_double(median_share(n_t - quartile, n_t)) << "\n";
        out << "bands written to " << config.output_path << "\n";
        return kExitOk;
      },
      out_stream);
}

namespace {

struct VerifyCheck {
  std::string name;
  double tolerance;
  double observed;
  bool pass;
};

TrainingSet random_training(int n_s, int n_a, int n_x, Rng& rng) {
  TrainingSet training;
  training.inputs.resize(n_s, n_a);
  for (int i = 0; i < n_s; ++i)
    for (int k = 0; k < n_a; ++k) training.inputs(i, k) = 2.0 * rng.uniform() - 1.0;
  training.outputs.resize(n_s, n_x);
  for (int i = 0; i < n_s; ++i)
    for (int x = 0; x < n_x; ++x) {
      const double a = training.inputs(i, 0);
      training.outputs(i, x) = 0.4 + 0.8 * a + 0.3 * std::sin(3.0 * a + x) +
                               0.25 * rng.normal();
    }
  return training;
}

}  // namespace

int cmd_verify(const RunConfig& config, std::ostream& out_stream) {
  return run_guarded(
      [&](std::ostream& out) {
        std::vector<VerifyCheck> checks;

        // Quadrature vs closed-form posterior moments and evidence ratios.
        {
          Rng rng(31);
          const TrainingSet training = random_training(8, 1, 1, rng);
          const std::vector<Interval> box(1, Interval{-1.0, 1.0});
          const BasisSpec spec = make_total_degree_spec(1, box);
          const DesignMatrix design = build_design_matrix(spec, training.inputs);
          const CoefficientPosterior post = fit(training, spec);
          const QuadratureGrid grid = QuadratureGrid::around(post, 80.0, 257);
          const QuadratureMoments q =
              quadrature_posterior_moments(training, design, grid);

          double mean_err = 0.0;
          for (int nu = 0; nu < 2; ++nu)
            mean_err = std::max(mean_err, std::abs(q.mean[nu] - post.c_hat(nu, 0)) /
                                              std::abs(post.c_hat(nu, 0)));
          checks.push_back({"quadrature_mean_vs_closed_form", 1e-6, mean_err,
                            mean_err <= 1e-6});

          double cov_err = 0.0;
          for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 2; ++j) {
              const double expected = coefficient_covariance(post, i, 0, j, 0);
              cov_err = std::max(cov_err, std::abs(q.covariance(i, j) - expected) /
                                              std::abs(expected));
            }
          checks.push_back({"quadrature_covariance_vs_closed_form", 1e-5, cov_err,
                            cov_err <= 1e-5});

          TrainingSet other = training;
          other.outputs.array() += 0.35;
          other.outputs.col(0)[0] += 0.5;
          const CoefficientPosterior post2 = fit(other, spec);
          const QuadratureGrid grid2 = QuadratureGrid::around(post2, 80.0, 257);
          const QuadratureMoments q2 =
              quadrature_posterior_moments(other, design, grid2);
          const double lhs = q.log_norm - q2.log_norm;
          const double rhs = log_evidence(training, spec).log_evidence -
                             log_evidence(other, spec).log_evidence;
          const double ratio_err = std::abs(lhs - rhs);
          checks.push_back({"quadrature_evidence_ratio", 1e-5, ratio_err,
                            ratio_err <= 1e-5});
        }

        // Monte Carlo propagation against the closed-form moments.
        {
          Rng rng(57);
          TrainingSet training = random_training(12, 1, 2, rng);
          const std::vector<Interval> box(1, Interval{-1.0, 1.0});
          const BasisSpec spec = make_total_degree_spec(1, box);
          const CoefficientPosterior post = fit(training, spec);
          Eigen::MatrixXd atoms(512, 1);
          for (int j = 0; j < 512; ++j) atoms(j, 0) = 2.0 * rng.uniform() - 1.0;
          const InputPosterior input = InputPosterior::uniform(std::move(atoms));
          const McPropagationCheck mc =
              mc_propagation_check(post, input, config.verify_mc_draws, 99);
          const double worst = std::max(mc.max_mean_sigma, mc.max_var_sigma);
          checks.push_back({"mc_propagation_within_3_se", 3.0, worst, worst <= 3.0});
        }

        // Constancy of the Fisher-metric prior in the coefficients.
        {
          Rng rng(73);
          Eigen::MatrixXd samples(20, 2);
          for (int i = 0; i < 20; ++i)
            for (int k = 0; k < 2; ++k) samples(i, k) = 2.0 * rng.uniform() - 1.0;
          const std::vector<Interval> box(2, Interval{-1.0, 1.0});
          const BasisSpec spec = make_total_degree_spec(2, box);
          std::vector<Eigen::MatrixXd> c_points;
          for (int p = 0; p < 3; ++p) {
            Eigen::MatrixXd c(spec.n_basis(), 1);
            for (int nu = 0; nu < spec.n_basis(); ++nu) c(nu, 0) = 2.0 * rng.normal();
            c_points.push_back(std::move(c));
          }
          const RiemannPriorReport rep = riemann_prior_check(spec, samples, c_points);
          const double observed =
              rep.singular ? std::numeric_limits<double>::infinity()
                           : rep.det_spread_rel;
          checks.push_back({"riemann_prior_constant_in_coefficients", 1e-8, observed,
                            observed <= 1e-8});
        }

        // Residual-norm chi2 against the projector trace form.
        {
          Rng rng(91);
          double worst = 0.0;
          for (int rep = 0; rep < 5; ++rep) {
            const TrainingSet training = random_training(10, 1, 2, rng);
            const std::vector<Interval> box(1, Interval{-1.0, 1.0});
            const BasisSpec spec = make_total_degree_spec(2, box);
            const DesignMatrix design = build_design_matrix(spec, training.inputs);
            const CoefficientPosterior post = fit(training, spec);
            const double projector = chi2_projector_form(training, design);
            worst = std::max(worst, std::abs(projector - post.chi2_min) /
                                        std::max(post.chi2_min, 1.0));
          }
          checks.push_back({"chi2_projector_agreement", 1e-12, worst, worst <= 1e-12});
        }

        json report = json::array();
        bool all_pass = true;
        for (const auto& c : checks) {
          report.push_back({{"check", c.name},
                            {"tolerance", c.tolerance},
                            {"observed", c.observed},
                            {"pass", c.pass}});
          all_pass = all_pass && c.pass;
        }
        out << report.dump(2) << "\n";
        if (!config.output_path.empty()) {
          std::ofstream file(config.output_path);
          if (!file)
            throw ParseError(config.output_path + ": cannot open file for writing");
          file << report.dump(2) << "\n";
        }
        return all_pass ? kExitOk : kExitNumerical;
      },
      out_stream);
}

}  // namespace suruq

#include "suruq/gpr.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <sstream>

namespace suruq {

namespace {

Eigen::VectorXd cross_covariance(const Kernel& kernel, const Eigen::MatrixXd& train,
                                 const Eigen::VectorXd& a) {
  Eigen::VectorXd k_star(train.rows());
  for (Eigen::Index i = 0; i < train.rows(); ++i) {
    double q = 0.0;
    for (Eigen::Index d = 0; d < train.cols(); ++d) {
      const double r = (train(i, d) - a[d]) / kernel.lengthscales[d];
      q += r * r;
    }
    k_star[i] = kernel.amplitude2 * std::exp(-0.5 * q);
  }
  return k_star;
}

}  // namespace

void Kernel::validate(int n_params) const {
  if (family != Family::squared_exponential)
    throw ContractError("Kernel: unsupported family");
  if (!(amplitude2 > 0.0) || !std::isfinite(amplitude2))
    throw ContractError("Kernel: amplitude2 must be positive and finite");
  if (lengthscales.size() != n_params) {
    std::ostringstream msg;
    msg << "Kernel: " << lengthscales.size() << " lengthscales for " << n_params
        << " parameters";
    throw ContractError(msg.str());
  }
  for (Eigen::Index d = 0; d < lengthscales.size(); ++d)
    if (!(lengthscales[d] > 0.0) || !std::isfinite(lengthscales[d]))
      throw ContractError("Kernel: lengthscales must be positive and finite");
  if (nugget >= 0.0 && !std::isfinite(nugget))
    throw ContractError("Kernel: nugget must be finite");
}

Eigen::MatrixXd kernel_matrix(const Kernel& kernel, const Eigen::MatrixXd& a,
                              const Eigen::MatrixXd& b) {
  kernel.validate(static_cast<int>(a.cols()));
  if (b.cols() != a.cols())
    throw ContractError("kernel_matrix: point sets have different dimensions");
  Eigen::MatrixXd k(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    k.row(i) = cross_covariance(kernel, b, a.row(i).transpose()).transpose();
  return k;
}

Eigen::MatrixXd kernel_matrix(const Kernel& kernel, const Eigen::MatrixXd& a) {
  Eigen::MatrixXd k = kernel_matrix(kernel, a, a);
  k = ((k + k.transpose()) * 0.5).eval();
  k.diagonal().array() += kernel.effective_nugget();
  return k;
}

GprPosterior fit_gpr(const TrainingSet& training, const BasisSpec& spec,
                     const Kernel& kernel) {
  training.validate();
  spec.validate();
  kernel.validate(training.n_inputs());

  const Eigen::MatrixXd k_s = kernel_matrix(kernel, training.inputs);
  SpdFactor k_factor;
  try {
    k_factor = SpdFactor::factor(k_s, "kernel matrix");
  } catch (const SingularDesignError&) {
    throw KernelSingularError(
        "kernel matrix is not positive definite; increase the nugget");
  }

  const DesignMatrix design = build_design_matrix(spec, training.inputs);
  // Whiten with K = L L^T and solve the plain least-squares problem.
  const Eigen::MatrixXd m_white = k_factor.whiten(design.entries);
  const Eigen::MatrixXd z_white = k_factor.whiten(training.outputs);
  LinearFit core = solve_least_squares(m_white, z_white);

  GprPosterior post;
  post.c_hat_tilde = std::move(core.c_hat);
  post.h_tilde_factor = std::move(core.h_factor);
  post.chi2_tilde_min = core.chi2_min;
  post.condition_estimate = core.condition_estimate;
  post.k_s_factor = std::move(k_factor);
  post.kernel = kernel;
  post.dims = {training.n_samples(), spec.n_basis(), training.n_sites()};
  post.spec = spec;
  post.train_inputs = training.inputs;
  post.alpha =
      post.k_s_factor.solve(training.outputs - design.entries * post.c_hat_tilde);
  post.site_labels = training.labels();
  if (post.dims.sigma2_denominator() > 0)
    post.sigma2_hat =
        post.chi2_tilde_min / static_cast<double>(post.dims.sigma2_denominator());
  return post;
}

GprPrediction gpr_predictive(const GprPosterior& post, const Eigen::VectorXd& a) {
  const Eigen::VectorXd phi = eval_basis(post.spec, a);
  const Eigen::VectorXd k_star = cross_covariance(post.kernel, post.train_inputs, a);

  GprPrediction pred;
  pred.mean = post.c_hat_tilde.transpose() * phi + post.alpha.transpose() * k_star;
  const double self = post.kernel.amplitude2 + post.kernel.effective_nugget();
  const Eigen::VectorXd k_solved = post.k_s_factor.solve(k_star);
  double v = self - k_star.dot(k_solved);
  if (v < -1e-10)
    throw ContractError("gpr_predictive: predictive variance factor below -1e-10");
  pred.variance_factor = std::max(v, 0.0);
  if (post.covariance_defined()) {
    const Eigen::VectorXd h_phi = post.h_tilde_factor.solve(phi).col(0);
    pred.coeff_var = *post.sigma2_hat * phi.dot(h_phi);
  }
  return pred;
}

EvidenceReport log_evidence_gpr(const TrainingSet& training, const BasisSpec& spec,
                                const Kernel& kernel) {
  const GprPosterior post = fit_gpr(training, spec, kernel);
  return evidence_from_fit(post.h_tilde_factor, post.chi2_tilde_min, post.dims,
                           post.k_s_factor.logdet());
}

PropagationResult propagate_gpr(const GprPosterior& post, const InputPosterior& input,
                                bool include_surrogate, double epsilon) {
  if (!(std::isfinite(epsilon) && epsilon > 0.0))
    throw ContractError("propagate_gpr: epsilon must be finite and positive");
  if (input.samples.cols() != post.spec.n_params())
    throw ContractError("propagate_gpr: sample dimension does not match basis");

  const int n_x = post.dims.n_x;
  const int n_j = input.n_samples();
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(n_x);
  Eigen::MatrixXd second = Eigen::MatrixXd::Zero(n_x, n_x);
  double term = 0.0;
  const bool with_term = include_surrogate && post.covariance_defined();
  for (int j = 0; j < n_j; ++j) {
    const GprPrediction p = gpr_predictive(post, input.samples.row(j).transpose());
    const double w = input.weights[j];
    mean.noalias() += w * p.mean;
    second.noalias() += w * (p.mean * p.mean.transpose());
    if (with_term && p.coeff_var) term += w * *p.coeff_var * p.variance_factor;
  }

  PropagationResult res;
  res.epsilon = epsilon;
  res.mean = mean;
  res.cov_naive = second - mean * mean.transpose();
  res.cov_total = res.cov_naive;
  res.surrogate_share = Eigen::VectorXd::Zero(n_x);
  res.trust_ratio = Eigen::VectorXd::Zero(n_x);
  res.trust_ratio_centered = Eigen::VectorXd::Zero(n_x);
  res.trustworthy.assign(static_cast<size_t>(n_x), true);
  if (!include_surrogate) return res;
  if (!post.covariance_defined()) {
    std::ostringstream msg;
    msg << "covariance undefined: (N_s - N_p) N_x - 2 = "
        << post.dims.sigma2_denominator() << " <= 0; returning the naive result only";
    res.surrogate_defined = false;
    res.surrogate_status = msg.str();
    return res;
  }

  res.surrogate_term = term;
  res.cov_total.diagonal().array() += term;
  const double inf = std::numeric_limits<double>::infinity();
  for (int x = 0; x < n_x; ++x) {
    const double total = res.cov_total(x, x);
    res.surrogate_share[x] = total > 0.0 ? term / total : 0.0;
    const double denom = second(x, x);
    res.trust_ratio[x] = denom > 0.0 ? term / denom : term == 0.0 ? 0.0 : inf;
    const double centered = res.cov_naive(x, x);
    res.trust_ratio_centered[x] =
        centered > 0.0 ? term / centered : term == 0.0 ? 0.0 : inf;
    res.trustworthy[static_cast<size_t>(x)] = res.trust_ratio[x] < epsilon;
  }
  return res;
}

ThetaGrid ThetaGrid::make(std::vector<Point> points) {
  if (points.empty()) throw ContractError("ThetaGrid: empty grid");
  double sum = 0.0;
  for (size_t i = 0; i < points.size(); ++i) {
    if (!(points[i].weight > 0.0) || !std::isfinite(points[i].weight)) {
      std::ostringstream msg;
      msg << "ThetaGrid: weight " << i << " must be positive and finite";
      throw ContractError(msg.str());
    }
    sum += points[i].weight;
  }
  for (auto& p : points) p.weight /= sum;
  ThetaGrid grid;
  grid.points = std::move(points);
  return grid;
}

MixturePredictive marginalize_theta_predict(const TrainingSet& training,
                                            const BasisSpec& spec, const ThetaGrid& grid,
                                            const Eigen::MatrixXd& query) {
  const int n_q = static_cast<int>(query.rows());
  const int n_x = training.n_sites();

  MixturePredictive mix;
  mix.mean = Eigen::MatrixXd::Zero(n_q, n_x);
  mix.variance = Eigen::MatrixXd::Zero(n_q, n_x);
  Eigen::MatrixXd second = Eigen::MatrixXd::Zero(n_q, n_x);

  double used_weight = 0.0;
  for (const auto& point : grid.points) {
    GprPosterior post;
    try {
      post = fit_gpr(training, spec, point.kernel);
    } catch (const Error& e) {
      std::cerr << "warning: dropping theta-grid point: " << e.what() << "\n";
      ++mix.n_dropped;
      continue;
    }
    used_weight += point.weight;
    for (int q = 0; q < n_q; ++q) {
      const GprPrediction p = gpr_predictive(post, query.row(q).transpose());
      const double var =
          p.coeff_var ? *p.coeff_var * p.variance_factor : 0.0;
      for (int x = 0; x < n_x; ++x) {
        mix.mean(q, x) += point.weight * p.mean[x];
        second(q, x) += point.weight * (var + p.mean[x] * p.mean[x]);
      }
    }
  }
  if (used_weight <= 0.0)
    throw AggregateError("marginalize_theta_predict: every grid point failed");

  mix.mean /= used_weight;
  second /= used_weight;
  mix.variance = second - mix.mean.cwiseProduct(mix.mean);
  return mix;
}

MixturePropagation marginalize_theta_propagate(const TrainingSet& training,
                                               const BasisSpec& spec,
                                               const ThetaGrid& grid,
                                               const InputPosterior& input) {
  const int n_x = training.n_sites();

  struct Component {
    double weight;
    PropagationResult res;
  };
  std::vector<Component> parts;
  MixturePropagation mix;
  for (const auto& point : grid.points) {
    try {
      const GprPosterior post = fit_gpr(training, spec, point.kernel);
      parts.push_back({point.weight, propagate_gpr(post, input, true)});
    } catch (const Error& e) {
      std::cerr << "warning: dropping theta-grid point: " << e.what() << "\n";
      ++mix.n_dropped;
    }
  }
  if (parts.empty())
    throw AggregateError("marginalize_theta_propagate: every grid point failed");

  double used_weight = 0.0;
  for (const auto& c : parts) used_weight += c.weight;

  mix.mean = Eigen::VectorXd::Zero(n_x);
  mix.cov_naive = Eigen::MatrixXd::Zero(n_x, n_x);
  for (const auto& c : parts) {
    const double w = c.weight / used_weight;
    mix.mean.noalias() += w * c.res.mean;
    mix.cov_naive.noalias() += w * c.res.cov_naive;
    mix.surrogate_term += w * c.res.surrogate_term;
  }
  mix.theta_spread = Eigen::MatrixXd::Zero(n_x, n_x);
  for (const auto& c : parts) {
    const double w = c.weight / used_weight;
    const Eigen::VectorXd d = c.res.mean - mix.mean;
    mix.theta_spread.noalias() += w * (d * d.transpose());
  }
  mix.cov_total = mix.cov_naive + mix.theta_spread;
  mix.cov_total.diagonal().array() += mix.surrogate_term;
  mix.surrogate_share.resize(n_x);
  for (int x = 0; x < n_x; ++x) {
    const double total = mix.cov_total(x, x);
    const double surr = mix.surrogate_term + mix.theta_spread(x, x);
    mix.surrogate_share[x] = total > 0.0 ? surr / total : 0.0;
  }
  return mix;
}

}  // namespace suruq

#pragma once

#include <Eigen/Dense>

#include <optional>
#include <vector>

#include "suruq/propagate.hpp"
#include "suruq/surrogate.hpp"

namespace suruq {

/// Squared-exponential covariance function with per-dimension lengthscales
/// and an additive diagonal nugget.
struct Kernel {
  enum class Family { squared_exponential };

  Family family = Family::squared_exponential;
  double amplitude2 = 1.0;
  Eigen::VectorXd lengthscales;  // N_a
  double nugget = -1.0;          // negative means "default": 1e-10 * amplitude2

  double effective_nugget() const { return nugget < 0.0 ? 1e-10 * amplitude2 : nugget; }
  void validate(int n_params) const;
};

/// Cross-covariance matrix, entry (i,j) = k(a_i, b_j). No nugget.
Eigen::MatrixXd kernel_matrix(const Kernel& kernel, const Eigen::MatrixXd& a,
                              const Eigen::MatrixXd& b);

/// Self-covariance at a: symmetric, nugget added on the diagonal.
Eigen::MatrixXd kernel_matrix(const Kernel& kernel, const Eigen::MatrixXd& a);

/// Surrogate posterior under a kernelized likelihood: the plain analysis
/// with H -> M^T K^{-1} M and the misfit measured in the K metric.
struct GprPosterior {
  Eigen::MatrixXd c_hat_tilde;  // N_p x N_x
  SpdFactor h_tilde_factor;     // H~ = M^T K^{-1} M
  double chi2_tilde_min = 0.0;
  std::optional<double> sigma2_hat;
  SpdFactor k_s_factor;  // K_s over the training inputs
  Kernel kernel;
  Dims dims;
  BasisSpec spec;
  Eigen::MatrixXd train_inputs;  // retained for cross-covariances
  Eigen::MatrixXd alpha;         // K^{-1} (Z - M c_hat_tilde)
  std::vector<std::string> site_labels;
  double condition_estimate = 0.0;

  bool covariance_defined() const { return dims.sigma2_denominator() > 0; }
};

/// Fits by whitening: with K = L L^T the problem reduces to ordinary least
/// squares on (L^{-1} M, L^{-1} Z), which reproduces the plain fit exactly
/// when K is the identity.
GprPosterior fit_gpr(const TrainingSet& training, const BasisSpec& spec,
                     const Kernel& kernel);

struct GprPrediction {
  Eigen::VectorXd mean;           // trend + kernel correction, per site
  double variance_factor = 0.0;   // k(a,a) - k_*^T K^{-1} k_*, clamped at 0
  std::optional<double> coeff_var;  // sigma2_hat * phi^T H~^{-1} phi
};

/// Predictive mean (universal-kriging form) and the two variance pieces.
/// The surrogate-uncertainty variance at a point is their product
/// coeff_var * variance_factor, which reduces to the plain coefficient term
/// when K is the identity.
GprPrediction gpr_predictive(const GprPosterior& post, const Eigen::VectorXd& a);

/// Evidence with the kernel substitutions plus the -(N_x/2) logdet K_s term
/// from the Gaussian normalization (reported in components.log_kernel_norm).
EvidenceReport log_evidence_gpr(const TrainingSet& training, const BasisSpec& spec,
                                const Kernel& kernel);

/// Propagation through a fixed-kernel GPR surrogate: weighted sums of the
/// predictive mean over the input-posterior atoms, with the surrogate term
/// sigma2_hat * sum_j w_j (phi_j^T H~^{-1} phi_j) v(a_j).
PropagationResult propagate_gpr(const GprPosterior& post, const InputPosterior& input,
                                bool include_surrogate, double epsilon = 1e-3);

/// Discrete hyperparameter prior: kernels with positive weights summing to 1.
struct ThetaGrid {
  struct Point {
    Kernel kernel;
    double weight = 0.0;
  };
  std::vector<Point> points;

  /// Validates positivity and normalizes the weights.
  static ThetaGrid make(std::vector<Point> points);
};

struct MixturePredictive {
  Eigen::MatrixXd mean;      // n_query x N_x
  Eigen::MatrixXd variance;  // n_query x N_x; includes between-kernel mean spread
  int n_dropped = 0;         // grid points whose fit failed
};

/// Prior-weighted mixture of per-kernel predictions at the query points.
/// Mixture variance follows the law of total variance.
MixturePredictive marginalize_theta_predict(const TrainingSet& training,
                                            const BasisSpec& spec, const ThetaGrid& grid,
                                            const Eigen::MatrixXd& query);

struct MixturePropagation {
  Eigen::VectorXd mean;
  Eigen::MatrixXd cov_naive;     // mixture of per-kernel naive covariances
  Eigen::MatrixXd theta_spread;  // between-kernel mean spread
  double surrogate_term = 0.0;   // mixture of per-kernel surrogate terms
  Eigen::MatrixXd cov_total;     // cov_naive + theta_spread + surrogate_term * I
  Eigen::VectorXd surrogate_share;
  int n_dropped = 0;
};

/// Prior-weighted mixture of per-kernel propagations; the between-kernel
/// spread of the propagated means is assigned to the surrogate share.
MixturePropagation marginalize_theta_propagate(const TrainingSet& training,
                                               const BasisSpec& spec,
                                               const ThetaGrid& grid,
                                               const InputPosterior& input);

}  // namespace suruq

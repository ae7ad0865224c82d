#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "suruq/basis.hpp"
#include "suruq/errors.hpp"

namespace suruq {

/// Simulation training data: inputs A_s (one parameter vector per row) and
/// the matching observables Z_s (one column per measurement site).
struct TrainingSet {
  Eigen::MatrixXd inputs;                // N_s x N_a
  Eigen::MatrixXd outputs;               // N_s x N_x
  std::vector<std::string> site_labels;  // N_x, generated if empty

  int n_samples() const { return static_cast<int>(inputs.rows()); }
  int n_inputs() const { return static_cast<int>(inputs.cols()); }
  int n_sites() const { return static_cast<int>(outputs.cols()); }

  /// Throws ContractError on row-count mismatch, empty data, or non-finite
  /// entries (the offending entry is named).
  void validate() const;

  /// Site labels, generating "site0..N" when none were provided.
  std::vector<std::string> labels() const;
};

/// Cholesky-backed handle on a symmetric positive definite matrix: solves,
/// log-determinant, inverse entries, and an inverse square root operator.
class SpdFactor {
 public:
  SpdFactor() = default;

  /// Factors h; throws SingularDesignError when h is not numerically PD.
  static SpdFactor factor(Eigen::MatrixXd h, const std::string& context);

  const Eigen::MatrixXd& matrix() const { return h_; }
  int size() const { return static_cast<int>(h_.rows()); }

  Eigen::MatrixXd solve(const Eigen::MatrixXd& b) const { return llt_.solve(b); }
  double logdet() const;
  double inverse_entry(int i, int j) const;
  /// trace(G H^{-1})
  double inverse_trace_product(const Eigen::MatrixXd& g) const;
  /// W u with W = L^{-T}, so that W W^T = H^{-1}.
  Eigen::MatrixXd apply_sqrt_inverse(const Eigen::MatrixXd& u) const;
  /// L^{-1} b for H = L L^T (whitening transform).
  Eigen::MatrixXd whiten(const Eigen::MatrixXd& b) const;

 private:
  Eigen::MatrixXd h_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

struct Dims {
  int n_s = 0;
  int n_p = 0;
  int n_x = 0;

  long n_sx() const { return static_cast<long>(n_s) * n_x; }
  long n_bx() const { return static_cast<long>(n_p) * n_x; }
  /// Student-t degrees of freedom of the coefficient posterior.
  long dof() const { return n_sx() - n_bx(); }
  /// Denominator of the Bayesian noise-scale estimate.
  long sigma2_denominator() const { return dof() - 2; }
};

/// Raw least-squares core: coefficients, factored Gram matrix, misfit, and a
/// condition estimate, computed from an explicit design matrix.
struct LinearFit {
  Eigen::MatrixXd c_hat;  // N_p x N_x
  SpdFactor h_factor;     // H = M^T M
  double chi2_min = 0.0;
  double condition_estimate = 0.0;
};

/// Column-pivoted QR solve of min ||Z - M C||_F. Throws UnderdeterminedError
/// when rows < cols and SingularDesignError (naming near-dependent columns)
/// when the condition estimate exceeds 1e12.
LinearFit solve_least_squares(const Eigen::MatrixXd& design,
                              const Eigen::MatrixXd& outputs);

/// Exact coefficient posterior of the generalized linear surrogate: matrix
/// Student-t with mean c_hat and per-site covariance sigma2_hat * H^{-1}.
struct CoefficientPosterior {
  Eigen::MatrixXd c_hat;  // N_p x N_x
  SpdFactor h_factor;
  double chi2_min = 0.0;
  /// chi2_min / ((N_s - N_p) N_x - 2); empty when that denominator is <= 0.
  std::optional<double> sigma2_hat;
  Dims dims;
  BasisSpec spec;
  std::vector<std::string> site_labels;
  double condition_estimate = 0.0;

  bool covariance_defined() const { return dims.sigma2_denominator() > 0; }
};

/// Total misfit trace{(Z - M C)^T (Z - M C)} for arbitrary coefficients.
double chi2(const TrainingSet& training, const DesignMatrix& design,
            const Eigen::MatrixXd& coeffs);

CoefficientPosterior fit(const TrainingSet& training, const BasisSpec& spec);

/// Entry (nu,x),(nu_p,x_p) of the coefficient covariance:
/// sigma2_hat * (H^{-1})_{nu,nu_p} * delta_{x,x_p}.
/// Throws CovarianceUndefinedError when (N_s - N_p) N_x <= 2.
double coefficient_covariance(const CoefficientPosterior& post, int nu, int x, int nu_p,
                              int x_p);

struct EvidenceComponents {
  double log_solid_angle = 0.0;
  double neg_half_logdet_h = 0.0;
  double chi2_exponent_term = 0.0;
  double log_gamma_terms = 0.0;
  /// -(N_x/2) logdet K_s; zero for the plain (identity-covariance) model.
  double log_kernel_norm = 0.0;
};

struct EvidenceReport {
  double log_evidence = 0.0;
  EvidenceComponents components;
  long n_sx = 0;
  long n_bx = 0;
};

/// Log evidence of the model class, fully in log space. The coefficient
/// prior is an unnormalized uniform, so absolute values carry an arbitrary
/// constant; only differences on the same data are meaningful.
EvidenceReport log_evidence(const TrainingSet& training, const BasisSpec& spec);

/// Core evidence assembly from an already-computed fit.
EvidenceReport evidence_from_fit(const SpdFactor& h_factor, double chi2_min, Dims dims,
                                 double logdet_kernel = 0.0);

Eigen::VectorXd predict_mean(const CoefficientPosterior& post, const Eigen::VectorXd& a);

struct ModelComparison {
  int spec_id = 0;
  int n_basis = 0;
  std::optional<double> log_evidence;
  double posterior_prob = 0.0;
  std::string status;  // "ok" or the per-spec failure message
};

/// Evidence for each candidate spec, ranked best first; failures are kept in
/// the list with their message and zero probability. Probabilities are
/// normalized by log-sum-exp over the successful specs. Ties rank the spec
/// with fewer basis functions first.
std::vector<ModelComparison> compare_models(const TrainingSet& training,
                                            const std::vector<BasisSpec>& specs);

/// Draws from the matrix Student-t coefficient posterior:
/// C = c_hat + W U sqrt(chi2_min / g), with W W^T = H^{-1}, U iid standard
/// normal, and g ~ chi-square(N_sx - N_bx) shared across the draw.
std::vector<Eigen::MatrixXd> sample_coefficients(const CoefficientPosterior& post, int n,
                                                 std::uint64_t seed);

}  // namespace suruq

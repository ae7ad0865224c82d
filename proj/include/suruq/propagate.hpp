#pragma once

#include <Eigen/Dense>

#include <utility>
#include <vector>

#include "suruq/basis.hpp"
#include "suruq/surrogate.hpp"

namespace suruq {

/// Weighted-sample representation of the input-parameter posterior
/// p(a | d_exp). Quadrature nodes with quadrature weights fit the same mold.
struct InputPosterior {
  Eigen::MatrixXd samples;  // N_j x N_a
  Eigen::VectorXd weights;  // N_j, non-negative, summing to 1

  int n_samples() const { return static_cast<int>(samples.rows()); }

  /// Validates and normalizes. Weights off by more than 1e-12 are
  /// renormalized; beyond 1e-6 a warning is emitted on stderr.
  static InputPosterior from_samples(Eigen::MatrixXd samples, Eigen::VectorXd weights);

  /// Equal weights.
  static InputPosterior uniform(Eigen::MatrixXd samples);
};

/// Moments of the basis functions under the input posterior:
/// g_vec[nu]     = sum_j w_j Phi_nu(a_j)
/// g_mat[nu,nu'] = sum_j w_j Phi_nu(a_j) Phi_nu'(a_j)
struct BasisMoments {
  Eigen::VectorXd g_vec;
  Eigen::MatrixXd g_mat;
  long n_clamped = 0;        // samples clamped to the domain box
  double clamped_weight = 0; // their total weight
  BasisSpec spec;
};

/// Weighted sums over the input posterior. Out-of-domain samples are clamped
/// to the box and counted; more than 1% of total weight outside throws
/// DomainCoverageError. Partial sums run over fixed-size blocks combined in
/// a fixed pairwise order, so results are identical at any thread count.
BasisMoments basis_moments(const BasisSpec& spec, const InputPosterior& input,
                           int threads = 1);

/// Moments constructed from analytically known g and G (e.g. the exact
/// uniform measure). For testing and closed-form inputs.
BasisMoments exact_basis_moments(const BasisSpec& spec, Eigen::VectorXd g_vec,
                                 Eigen::MatrixXd g_mat);

/// mean_x = g_vec^T c_hat. Throws ContractError if the moments were built
/// for a different basis spec (compared by serialized identity).
Eigen::VectorXd propagate_mean(const CoefficientPosterior& post,
                               const BasisMoments& moments);

/// Propagated observable moments with and without the surrogate-uncertainty
/// term sigma2_hat * trace(G H^{-1}).
struct PropagationResult {
  Eigen::VectorXd mean;       // N_x
  Eigen::MatrixXd cov_naive;  // N_x x N_x, surrogate treated as exact
  Eigen::MatrixXd cov_total;  // cov_naive + surrogate_term * I
  double surrogate_term = 0.0;
  Eigen::VectorXd surrogate_share;       // surrogate_term / cov_total diagonal
  Eigen::VectorXd trust_ratio;           // second-moment denominator form
  Eigen::VectorXd trust_ratio_centered;  // centered-variance denominator (diagnostic)
  double epsilon = 1e-3;
  std::vector<bool> trustworthy;
  /// False when include_surrogate was requested but the dof condition fails;
  /// the naive fields are still filled and surrogate_status explains why.
  bool surrogate_defined = true;
  std::string surrogate_status;
};

PropagationResult propagate_covariance(const CoefficientPosterior& post,
                                       const BasisMoments& moments,
                                       bool include_surrogate, double epsilon = 1e-3);

struct TrustReport {
  Eigen::VectorXd ratio;                 // +inf where the denominator vanishes
  Eigen::VectorXd ratio_centered;
  std::vector<bool> trustworthy;
  double epsilon = 1e-3;
};

/// ratio_x = sigma2_hat trace(G H^{-1}) / (c_hat_x^T G c_hat_x); trustworthy
/// when below epsilon. Throws CovarianceUndefinedError under the dof gate and
/// ContractError for a non-finite or non-positive epsilon.
TrustReport trust_ratio(const CoefficientPosterior& post, const BasisMoments& moments,
                        double epsilon);

/// Compound site-time column index: site * n_times + time.
int flatten_spacetime(int n_sites, int n_times, int site, int time);
std::pair<int, int> unflatten_spacetime(int n_sites, int n_times, int index);

}  // namespace suruq

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <vector>

#include "suruq/propagate.hpp"
#include "suruq/surrogate.hpp"

namespace suruq {

/// Tensor-product trapezoid grid over the flattened coefficient space
/// (index l = x * N_p + nu). Exists to verify the closed-form posterior on
/// tiny instances, so dimensions are capped hard.
struct QuadratureGrid {
  Eigen::VectorXd center;      // N_bx
  Eigen::VectorXd half_width;  // N_bx
  Eigen::VectorXi nodes;       // per-dimension counts, odd

  /// Grid centered on the closed-form posterior mean with half-widths of
  /// sigma_multiplier posterior standard deviations (>= 8 enforced).
  static QuadratureGrid around(const CoefficientPosterior& post, double sigma_multiplier,
                               int nodes_per_dim);
};

struct QuadratureMoments {
  double log_norm = 0.0;
  Eigen::VectorXd mean;        // N_bx, flattened
  Eigen::MatrixXd covariance;  // N_bx x N_bx
  double refine_delta_norm = 0.0;    // relative change under node doubling
  double refine_delta_moments = 0.0;
};

/// Zeroth, first, and second moments of the unnormalized coefficient
/// posterior (chi^2(C))^(-N_sx/2), integrated by direct tensor trapezoid
/// with node-doubling convergence control. chi^2 is evaluated from the
/// residuals, never from the completed square. Guards: N_bx <= 3, total
/// fine-grid nodes <= 1e7, N_sx > N_bx + 2.
QuadratureMoments quadrature_posterior_moments(const TrainingSet& training,
                                               const DesignMatrix& design,
                                               const QuadratureGrid& grid);

struct RiemannPriorReport {
  double det_spread_rel = 0.0;  // spread of det(R_num) across coefficient points
  double max_rel_diff_vs_closed_form = 0.0;
  double max_rel_diff_vs_gram = 0.0;  // closed form vs H_s
  bool singular = false;
};

/// Checks that the Fisher-metric prior is constant in the coefficients: the
/// numerical log-likelihood Hessian (averaged over simulated data sets) is
/// compared across c_points and against the closed form sum_k Phi Phi^T.
RiemannPriorReport riemann_prior_check(const BasisSpec& spec,
                                       const Eigen::MatrixXd& samples,
                                       const std::vector<Eigen::MatrixXd>& c_points,
                                       std::uint64_t seed = 7);

/// Synthetic stand-in for an expensive simulation, 4 parameters on
/// [-1,1]^4, time index t in [0, n_times). With tau = t / (n_times - 1):
///
///   toy = 1 + (1 - 0.9 tau) * q(a) + 4 tau^2 * b(a)
///   q(a) = 0.9 a0 - 0.6 a1 + 0.4 a2 + 0.2 a3
///          + 0.5 a0^2 + 0.35 a0 a1 - 0.3 a1 a2 + 0.25 a3^2
///   b(a) = a0 a1 a2
///
/// Exactly quadratic at t = 0; the cubic interaction grows as tau^2 and is
/// orthogonal to every polynomial of degree <= 2 under the uniform measure,
/// so a degree-2 surrogate is exact early and increasingly misspecified
/// late while the explained signal shrinks.
double toy_simulator(const Eigen::Vector4d& a, int t, int n_times);

/// chi^2_min via the projector trace form trace{Z^T (1 - M H^{-1} M^T) Z}
/// with explicit inverses; cross-check for the residual-norm path.
double chi2_projector_form(const TrainingSet& training, const DesignMatrix& design);

struct McPropagationCheck {
  Eigen::VectorXd mean_observed, mean_expected, mean_se;
  Eigen::VectorXd var_observed, var_expected, var_se;
  double max_mean_sigma = 0.0;  // max_x |obs - exp| / se
  double max_var_sigma = 0.0;
};

/// Joint Monte Carlo over (input atom, coefficient draw): the empirical
/// mean and variance of the surrogate output are compared against
/// propagate_mean / propagate_covariance with their standard errors.
McPropagationCheck mc_propagation_check(const CoefficientPosterior& post,
                                        const InputPosterior& input, long n_draws,
                                        std::uint64_t seed);

}  // namespace suruq

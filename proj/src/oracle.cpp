#include "suruq/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "suruq/rng.hpp"

namespace suruq {

namespace {

constexpr int kMaxCoefficientDims = 3;
constexpr double kMaxTotalNodes = 1e7;
constexpr double kRefineTolerance = 1e-4;

// Flattened coefficient index: l = x * N_p + nu.
Eigen::MatrixXd unflatten_coeffs(const Eigen::VectorXd& flat, int n_p, int n_x) {
  Eigen::MatrixXd c(n_p, n_x);
  for (int x = 0; x < n_x; ++x)
    for (int nu = 0; nu < n_p; ++nu) c(nu, x) = flat[x * n_p + nu];
  return c;
}

struct RawMoments {
  double log_scale = 0.0;  // -(N_sx/2) log chi2_ref
  double m0 = 0.0;
  Eigen::VectorXd m1;      // about the grid center
  Eigen::MatrixXd m2;
};

RawMoments integrate(const TrainingSet& training, const DesignMatrix& design,
                     const Eigen::VectorXd& center, const Eigen::VectorXd& half_width,
                     const Eigen::VectorXi& nodes, double exponent_half_nsx) {
  const int dims = static_cast<int>(center.size());
  const int n_p = design.n_basis();
  const int n_x = training.n_sites();

  // Reference misfit at the grid center keeps the integrand in range; the
  // scaling is restored in log space afterwards.
  const Eigen::MatrixXd c_center = unflatten_coeffs(center, n_p, n_x);
  const double chi2_ref = (training.outputs - design.entries * c_center).squaredNorm();

  RawMoments out;
  out.log_scale = -exponent_half_nsx * std::log(chi2_ref);
  out.m1 = Eigen::VectorXd::Zero(dims);
  out.m2 = Eigen::MatrixXd::Zero(dims, dims);

  Eigen::VectorXd step(dims);
  for (int d = 0; d < dims; ++d)
    step[d] = 2.0 * half_width[d] / static_cast<double>(nodes[d] - 1);

  std::vector<int> idx(static_cast<size_t>(dims), 0);
  Eigen::VectorXd u(dims);
  Eigen::MatrixXd c(n_p, n_x);
  const double log_chi2_ref = std::log(chi2_ref);
  for (;;) {
    double w = 1.0;
    for (int d = 0; d < dims; ++d) {
      u[d] = -half_width[d] + step[d] * idx[static_cast<size_t>(d)];
      if (idx[static_cast<size_t>(d)] == 0 || idx[static_cast<size_t>(d)] == nodes[d] - 1)
        w *= 0.5;
    }
    for (int x = 0; x < n_x; ++x)
      for (int nu = 0; nu < n_p; ++nu) c(nu, x) = center[x * n_p + nu] + u[x * n_p + nu];
    const double chi2_val = (training.outputs - design.entries * c).squaredNorm();
    const double f = w * std::exp(-exponent_half_nsx * (std::log(chi2_val) - log_chi2_ref));
    out.m0 += f;
    out.m1.noalias() += f * u;
    out.m2.noalias() += f * (u * u.transpose());

    int d = dims - 1;
    while (d >= 0 && ++idx[static_cast<size_t>(d)] == nodes[d]) {
      idx[static_cast<size_t>(d)] = 0;
      --d;
    }
    if (d < 0) break;
  }

  double log_volume_element = 0.0;
  for (int d = 0; d < dims; ++d) log_volume_element += std::log(step[d]);
  out.log_scale += log_volume_element;
  return out;
}

// Posterior standard deviations per flattened dimension from the closed form.
Eigen::VectorXd closed_form_sigmas(const LinearFit& core, const Dims& dims) {
  const double denom = static_cast<double>(dims.sigma2_denominator());
  const double sigma2 = core.chi2_min / denom;
  Eigen::VectorXd sig(dims.n_bx());
  for (int x = 0; x < dims.n_x; ++x)
    for (int nu = 0; nu < dims.n_p; ++nu)
      sig[x * dims.n_p + nu] = std::sqrt(sigma2 * core.h_factor.inverse_entry(nu, nu));
  return sig;
}

}  // namespace

QuadratureGrid QuadratureGrid::around(const CoefficientPosterior& post,
                                      double sigma_multiplier, int nodes_per_dim) {
  if (sigma_multiplier < 8.0)
    throw ContractError("QuadratureGrid: half-width must cover >= 8 standard deviations");
  if (!post.covariance_defined())
    throw CovarianceUndefinedError(
        "QuadratureGrid: posterior covariance undefined, cannot size the grid");
  const Dims& d = post.dims;
  QuadratureGrid grid;
  grid.center.resize(d.n_bx());
  grid.half_width.resize(d.n_bx());
  grid.nodes = Eigen::VectorXi::Constant(d.n_bx(), nodes_per_dim);
  for (int x = 0; x < d.n_x; ++x)
    for (int nu = 0; nu < d.n_p; ++nu) {
      const long l = static_cast<long>(x) * d.n_p + nu;
      grid.center[l] = post.c_hat(nu, x);
      grid.half_width[l] = sigma_multiplier *
          std::sqrt(*post.sigma2_hat * post.h_factor.inverse_entry(nu, nu));
    }
  return grid;
}

QuadratureMoments quadrature_posterior_moments(const TrainingSet& training,
                                               const DesignMatrix& design,
                                               const QuadratureGrid& grid) {
  training.validate();
  const Dims dims{training.n_samples(), design.n_basis(), training.n_sites()};
  const long n_bx = dims.n_bx();
  if (n_bx > kMaxCoefficientDims) {
    std::ostringstream msg;
    msg << "quadrature_posterior_moments: N_bx = " << n_bx << " exceeds the guard of "
        << kMaxCoefficientDims;
    throw ContractError(msg.str());
  }
  if (dims.n_sx() <= n_bx + 2)
    throw ContractError(
        "quadrature_posterior_moments: needs N_sx > N_bx + 2 for finite second moments");
  if (grid.center.size() != n_bx || grid.half_width.size() != n_bx ||
      grid.nodes.size() != n_bx)
    throw ContractError("quadrature_posterior_moments: grid dimensions do not match");

  double fine_total = 1.0;
  for (long d = 0; d < n_bx; ++d) {
    if (grid.nodes[d] < 3 || grid.nodes[d] % 2 == 0)
      throw ContractError("quadrature_posterior_moments: node counts must be odd and >= 3");
    if (!(grid.half_width[d] > 0.0))
      throw ContractError("quadrature_posterior_moments: half-widths must be positive");
    fine_total *= static_cast<double>(2 * grid.nodes[d] - 1);
  }
  if (fine_total > kMaxTotalNodes)
    throw ContractError(
        "quadrature_posterior_moments: fine grid exceeds the 1e7 node guard");

  // Closed-form sigmas are used only to check the grid invariant.
  const LinearFit core = solve_least_squares(design.entries, training.outputs);
  const Eigen::VectorXd sig = closed_form_sigmas(core, dims);
  for (long d = 0; d < n_bx; ++d)
    if (grid.half_width[d] < 8.0 * sig[d] * (1.0 - 1e-9)) {
      std::ostringstream msg;
      msg << "quadrature_posterior_moments: half-width of dimension " << d
          << " covers fewer than 8 posterior standard deviations";
      throw ContractError(msg.str());
    }

  const double exponent = 0.5 * static_cast<double>(dims.n_sx());
  const RawMoments coarse = integrate(training, design, grid.center, grid.half_width,
                                      grid.nodes, exponent);
  Eigen::VectorXi fine_nodes = grid.nodes;
  for (long d = 0; d < n_bx; ++d) fine_nodes[d] = 2 * grid.nodes[d] - 1;
  const RawMoments fine = integrate(training, design, grid.center, grid.half_width,
                                    fine_nodes, exponent);

  auto finish = [&](const RawMoments& raw) {
    QuadratureMoments m;
    m.log_norm = std::log(raw.m0) + raw.log_scale;
    m.mean = grid.center + raw.m1 / raw.m0;
    const Eigen::VectorXd rel = raw.m1 / raw.m0;
    m.covariance = raw.m2 / raw.m0 - rel * rel.transpose();
    return m;
  };
  QuadratureMoments result = finish(fine);
  const QuadratureMoments rough = finish(coarse);

  result.refine_delta_norm = std::abs(result.log_norm - rough.log_norm);
  double moment_delta = 0.0;
  const double cov_scale = result.covariance.diagonal().maxCoeff();
  for (long d = 0; d < n_bx; ++d)
    moment_delta = std::max(moment_delta,
                            std::abs(result.mean[d] - rough.mean[d]) / std::sqrt(cov_scale));
  for (long i = 0; i < n_bx; ++i)
    for (long j = 0; j < n_bx; ++j)
      moment_delta = std::max(
          moment_delta, std::abs(result.covariance(i, j) - rough.covariance(i, j)) / cov_scale);
  result.refine_delta_moments = moment_delta;

  if (result.refine_delta_norm > kRefineTolerance ||
      result.refine_delta_moments > kRefineTolerance) {
    std::ostringstream msg;
    msg << "quadrature did not converge under node doubling (norm delta "
        << result.refine_delta_norm << ", moment delta " << result.refine_delta_moments
        << " > " << kRefineTolerance << "); increase node counts";
    throw RefinementError(msg.str());
  }
  return result;
}

RiemannPriorReport riemann_prior_check(const BasisSpec& spec,
                                       const Eigen::MatrixXd& samples,
                                       const std::vector<Eigen::MatrixXd>& c_points,
                                       std::uint64_t seed) {
  spec.validate();
  if (c_points.size() < 2)
    throw ContractError("riemann_prior_check: needs at least two coefficient points");
  const DesignMatrix design = build_design_matrix(spec, samples);
  const int n_p = spec.n_basis();
  const int n_s = static_cast<int>(samples.rows());
  const int n_x = static_cast<int>(c_points[0].cols());
  for (const auto& c : c_points)
    if (c.rows() != n_p || c.cols() != n_x)
      throw ContractError("riemann_prior_check: coefficient point has wrong shape");

  RiemannPriorReport rep;

  // Closed form R = sum_k Phi(a_k) Phi(a_k)^T, assembled sample by sample.
  Eigen::MatrixXd r_closed = Eigen::MatrixXd::Zero(n_p, n_p);
  for (int k = 0; k < n_s; ++k) {
    const Eigen::VectorXd phi = design.entries.row(k).transpose();
    r_closed.noalias() += phi * phi.transpose();
  }
  const Eigen::MatrixXd gram = design.entries.transpose() * design.entries;
  rep.max_rel_diff_vs_gram =
      (r_closed - gram).cwiseAbs().maxCoeff() / gram.cwiseAbs().maxCoeff();

  Eigen::LLT<Eigen::MatrixXd> llt(r_closed);
  if (n_s < n_p || llt.info() != Eigen::Success) {
    rep.singular = true;
    return rep;
  }

  const long n_bx = static_cast<long>(n_p) * n_x;
  const double h = 0.5;
  Rng rng(seed);
  const int n_data_sets = 3;

  std::vector<double> dets;
  dets.reserve(c_points.size());
  double max_diff = 0.0;
  for (const auto& c_point : c_points) {
    Eigen::MatrixXd hess = Eigen::MatrixXd::Zero(n_bx, n_bx);
    for (int rep_i = 0; rep_i < n_data_sets; ++rep_i) {
      // Simulated data around this coefficient point, unit noise scale.
      Eigen::MatrixXd z = design.entries * c_point;
      for (Eigen::Index i = 0; i < z.rows(); ++i)
        for (Eigen::Index j = 0; j < z.cols(); ++j) z(i, j) += rng.normal();
      auto log_like = [&](const Eigen::MatrixXd& c) {
        return -0.5 * (z - design.entries * c).squaredNorm();
      };
      // Central second differences of the log-likelihood; exact for the
      // quadratic misfit up to roundoff.
      for (long i = 0; i < n_bx; ++i)
        for (long j = 0; j <= i; ++j) {
          Eigen::MatrixXd cpp = c_point, cpm = c_point, cmp = c_point, cmm = c_point;
          auto bump = [&](Eigen::MatrixXd& c, long l, double delta) {
            c(l % n_p, l / n_p) += delta;
          };
          bump(cpp, i, h); bump(cpp, j, h);
          bump(cpm, i, h); bump(cpm, j, -h);
          bump(cmp, i, -h); bump(cmp, j, h);
          bump(cmm, i, -h); bump(cmm, j, -h);
          const double d2 =
              (log_like(cpp) - log_like(cpm) - log_like(cmp) + log_like(cmm)) /
              (4.0 * h * h);
          hess(i, j) += d2;
          hess(j, i) = hess(i, j);
        }
    }
    hess /= static_cast<double>(n_data_sets);
    const Eigen::MatrixXd r_num = -hess;

    for (int x = 0; x < n_x; ++x)
      for (int xp = 0; xp < n_x; ++xp) {
        const Eigen::MatrixXd block = r_num.block(static_cast<long>(x) * n_p,
                                                  static_cast<long>(xp) * n_p, n_p, n_p);
        const Eigen::MatrixXd expect =
            x == xp ? r_closed : Eigen::MatrixXd::Zero(n_p, n_p).eval();
        max_diff = std::max(max_diff, (block - expect).cwiseAbs().maxCoeff() /
                                          r_closed.cwiseAbs().maxCoeff());
      }
    dets.push_back(r_num.determinant());
  }
  rep.max_rel_diff_vs_closed_form = max_diff;

  const auto [lo, hi] = std::minmax_element(dets.begin(), dets.end());
  double mid = 0.0;
  for (double d : dets) mid += d;
  mid /= static_cast<double>(dets.size());
  rep.det_spread_rel = (*hi - *lo) / std::abs(mid);
  return rep;
}

double toy_simulator(const Eigen::Vector4d& a, int t, int n_times) {
  if (n_times < 1) throw ContractError("toy_simulator: n_times must be >= 1");
  if (t < 0 || t >= n_times) {
    std::ostringstream msg;
    msg << "toy_simulator: time index " << t << " outside [0, " << n_times << ")";
    throw ContractError(msg.str());
  }
  for (int k = 0; k < 4; ++k)
    if (!(std::abs(a[k]) <= 1.0 + 1e-12)) {
      std::ostringstream msg;
      msg << "toy_simulator: parameter " << k << " = " << a[k] << " outside [-1,1]";
      throw ContractError(msg.str());
    }

  const double tau =
      n_times > 1 ? static_cast<double>(t) / static_cast<double>(n_times - 1) : 0.0;
  const double q = 0.9 * a[0] - 0.6 * a[1] + 0.4 * a[2] + 0.2 * a[3] +
                   0.5 * a[0] * a[0] + 0.35 * a[0] * a[1] - 0.3 * a[1] * a[2] +
                   0.25 * a[3] * a[3];
  const double b = a[0] * a[1] * a[2];
  return 1.0 + (1.0 - 0.9 * tau) * q + 4.0 * tau * tau * b;
}

double chi2_projector_form(const TrainingSet& training, const DesignMatrix& design) {
  const Eigen::MatrixXd& m = design.entries;
  const Eigen::MatrixXd h_inv = (m.transpose() * m).inverse();
  const Eigen::MatrixXd projector =
      Eigen::MatrixXd::Identity(m.rows(), m.rows()) - m * h_inv * m.transpose();
  return (training.outputs.transpose() * projector * training.outputs).trace();
}

McPropagationCheck mc_propagation_check(const CoefficientPosterior& post,
                                        const InputPosterior& input, long n_draws,
                                        std::uint64_t seed) {
  if (n_draws < 100) throw ContractError("mc_propagation_check: too few draws");
  if (!post.covariance_defined())
    throw CovarianceUndefinedError(
        "mc_propagation_check: posterior covariance undefined");

  const BasisMoments moments = basis_moments(post.spec, input);
  const Eigen::VectorXd mean_exp = propagate_mean(post, moments);
  const PropagationResult prop = propagate_covariance(post, moments, true);

  const int n_x = post.dims.n_x;
  const int n_p = post.dims.n_p;
  const int n_j = input.n_samples();
  const double nu = static_cast<double>(post.dims.dof());

  // Basis rows at the atoms and the cumulative weights for atom sampling.
  Eigen::MatrixXd phi(n_j, n_p);
  for (int j = 0; j < n_j; ++j)
    phi.row(j) =
        eval_basis_clamped(post.spec, input.samples.row(j).transpose(), nullptr)
            .transpose();
  std::vector<double> cumulative(static_cast<size_t>(n_j));
  double acc = 0.0;
  for (int j = 0; j < n_j; ++j) {
    acc += input.weights[j];
    cumulative[static_cast<size_t>(j)] = acc;
  }

  Rng rng(seed);
  Eigen::VectorXd s1 = Eigen::VectorXd::Zero(n_x);
  Eigen::VectorXd s2 = Eigen::VectorXd::Zero(n_x);
  Eigen::VectorXd s3 = Eigen::VectorXd::Zero(n_x);
  Eigen::VectorXd s4 = Eigen::VectorXd::Zero(n_x);
  Eigen::MatrixXd u(n_p, n_x);
  for (long k = 0; k < n_draws; ++k) {
    const double r = rng.uniform() * acc;
    const int atom = static_cast<int>(
        std::lower_bound(cumulative.begin(), cumulative.end(), r) - cumulative.begin());
    const int j = std::min(atom, n_j - 1);

    for (int i = 0; i < n_p; ++i)
      for (int x = 0; x < n_x; ++x) u(i, x) = rng.normal();
    const double g = rng.chi_square(nu);
    const double scale = std::sqrt(post.chi2_min / g);
    const Eigen::MatrixXd c = post.c_hat + scale * post.h_factor.apply_sqrt_inverse(u);

    for (int x = 0; x < n_x; ++x) {
      const double z = phi.row(j).dot(c.col(x));
      s1[x] += z;
      s2[x] += z * z;
      s3[x] += z * z * z;
      s4[x] += z * z * z * z;
    }
  }

  McPropagationCheck check;
  const double n = static_cast<double>(n_draws);
  check.mean_expected = mean_exp;
  check.var_expected = prop.cov_total.diagonal();
  check.mean_observed.resize(n_x);
  check.var_observed.resize(n_x);
  check.mean_se.resize(n_x);
  check.var_se.resize(n_x);
  for (int x = 0; x < n_x; ++x) {
    const double m1 = s1[x] / n;
    const double m2 = s2[x] / n - m1 * m1;
    // Central fourth moment from raw sums.
    const double m4 = s4[x] / n - 4.0 * m1 * s3[x] / n + 6.0 * m1 * m1 * s2[x] / n -
                      3.0 * m1 * m1 * m1 * m1;
    check.mean_observed[x] = m1;
    check.var_observed[x] = m2 * n / (n - 1.0);
    check.mean_se[x] = std::sqrt(m2 / n);
    check.var_se[x] = std::sqrt(std::max(m4 - m2 * m2, 0.0) / n);
    check.max_mean_sigma =
        std::max(check.max_mean_sigma,
                 std::abs(check.mean_observed[x] - check.mean_expected[x]) /
                     check.mean_se[x]);
    check.max_var_sigma =
        std::max(check.max_var_sigma,
                 std::abs(check.var_observed[x] - check.var_expected[x]) /
                     check.var_se[x]);
  }
  return check;
}

}  // namespace suruq

#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "suruq/gpr.hpp"

using namespace suruq;

namespace {

BasisSpec unit_spec(int n_params, int degree) {
  return make_total_degree_spec(degree, std::vector<Interval>(n_params, {-1.0, 1.0}));
}

Kernel se_kernel(double amplitude2, std::vector<double> ls, double nugget = -1.0) {
  Kernel k;
  k.amplitude2 = amplitude2;
  k.lengthscales = Eigen::Map<Eigen::VectorXd>(ls.data(),
                                               static_cast<Eigen::Index>(ls.size()));
  k.nugget = nugget;
  return k;
}

// Tiny lengthscales turn the squared-exponential into a numerically exact
// white kernel: unit diagonal, off-diagonal underflows to zero.
Kernel white_kernel(int dim) {
  return se_kernel(1.0, std::vector<double>(static_cast<size_t>(dim), 1e-8), 0.0);
}

TrainingSet training_1d(int n_s, std::uint64_t seed, int n_x = 1) {
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  TrainingSet t;
  t.inputs.resize(n_s, 1);
  for (int i = 0; i < n_s; ++i) t.inputs(i, 0) = u(eng);
  t.outputs.resize(n_s, n_x);
  for (int i = 0; i < n_s; ++i)
    for (int x = 0; x < n_x; ++x)
      t.outputs(i, x) = std::sin(2.0 * t.inputs(i, 0) + x) + 0.3 * u(eng);
  return t;
}

}  // namespace

TEST_CASE("kernel matrix anchors") {
  Eigen::MatrixXd one(1, 1);
  one << 0.3;
  const Kernel k2 = se_kernel(2.0, {0.5}, 0.0);
  CHECK(kernel_matrix(k2, one)(0, 0) == 2.0);

  Eigen::MatrixXd a(2, 1), b(3, 1);
  a << 0.1, 0.7;
  b << 0.7, -0.2, 0.1;
  const Eigen::MatrixXd cross = kernel_matrix(k2, a, b);
  CHECK(cross(0, 2) == 2.0);  // identical rows, zero distance
  CHECK(cross(1, 0) == 2.0);

  // Two points one lengthscale apart: amplitude2 * exp(-1/2).
  Eigen::MatrixXd pair(2, 1);
  pair << 0.0, 0.5;
  const Eigen::MatrixXd self = kernel_matrix(k2, pair);
  CHECK(self(0, 1) == doctest::Approx(2.0 * std::exp(-0.5)).epsilon(1e-15));

  Kernel bad = se_kernel(-1.0, {0.5});
  CHECK_THROWS_AS(kernel_matrix(bad, a, b), ContractError);
  Kernel bad_ls = se_kernel(1.0, {0.0});
  CHECK_THROWS_AS(kernel_matrix(bad_ls, a, b), ContractError);
}

TEST_CASE("kernel self-matrix is symmetric and PD after the nugget") {
  std::mt19937_64 eng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int rep = 0; rep < 10; ++rep) {
    Eigen::MatrixXd pts(12, 2);
    for (int i = 0; i < 12; ++i)
      for (int k = 0; k < 2; ++k) pts(i, k) = u(eng);
    const Kernel k = se_kernel(1.5, {0.8, 1.3});
    const Eigen::MatrixXd self = kernel_matrix(k, pts);
    CHECK((self - self.transpose()).cwiseAbs().maxCoeff() <= 1e-15);
    CHECK(Eigen::LLT<Eigen::MatrixXd>(self).info() == Eigen::Success);
  }
}

TEST_CASE("identity-kernel reduction reproduces the plain fit") {
  const TrainingSet t = training_1d(10, 11, 2);
  const BasisSpec spec = unit_spec(1, 1);
  const CoefficientPosterior plain = fit(t, spec);
  const GprPosterior gpr = fit_gpr(t, spec, white_kernel(1));

  CHECK((gpr.c_hat_tilde - plain.c_hat).cwiseAbs().maxCoeff() <=
        1e-12 * (1.0 + plain.c_hat.cwiseAbs().maxCoeff()));
  CHECK(gpr.chi2_tilde_min == doctest::Approx(plain.chi2_min).epsilon(1e-12));
  CHECK((gpr.h_tilde_factor.matrix() - plain.h_factor.matrix()).cwiseAbs().maxCoeff() <=
        1e-12 * plain.h_factor.matrix().cwiseAbs().maxCoeff());
  REQUIRE(gpr.sigma2_hat.has_value());
  CHECK(*gpr.sigma2_hat == doctest::Approx(*plain.sigma2_hat).epsilon(1e-12));

  // Predictive mean reduces to the plain mean away from the training points.
  Eigen::VectorXd a(1);
  a << 0.123456;
  const GprPrediction pred = gpr_predictive(gpr, a);
  const Eigen::VectorXd plain_mean = predict_mean(plain, a);
  CHECK((pred.mean - plain_mean).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(pred.variance_factor == doctest::Approx(1.0).epsilon(1e-12));

  // The evidence also reduces: logdet K = 0 for the identity kernel.
  const EvidenceReport ev = log_evidence_gpr(t, spec, white_kernel(1));
  const EvidenceReport plain_ev = log_evidence(t, spec);
  CHECK(ev.components.log_kernel_norm == 0.0);
  CHECK(ev.log_evidence == doctest::Approx(plain_ev.log_evidence).epsilon(1e-12));
}

TEST_CASE("in-span data gives zero kernel misfit for any PD kernel") {
  const BasisSpec spec = unit_spec(1, 1);
  TrainingSet t = training_1d(8, 13);
  const DesignMatrix design = build_design_matrix(spec, t.inputs);
  Eigen::MatrixXd c(2, 1);
  c << 0.7, -1.2;
  t.outputs = design.entries * c;
  const GprPosterior gpr = fit_gpr(t, spec, se_kernel(1.7, {0.6}));
  CHECK(gpr.chi2_tilde_min <= 1e-10 * t.outputs.squaredNorm());
}

TEST_CASE("3-point case matches a dense oracle with explicit inverses") {
  TrainingSet t;
  t.inputs.resize(3, 1);
  t.inputs << -0.8, 0.1, 0.9;
  t.outputs.resize(3, 1);
  t.outputs << 1.4, 0.2, -0.5;
  const BasisSpec spec = unit_spec(1, 1);
  const Kernel kernel = se_kernel(1.3, {0.7}, 1e-8);
  const GprPosterior gpr = fit_gpr(t, spec, kernel);

  const DesignMatrix design = build_design_matrix(spec, t.inputs);
  const Eigen::MatrixXd k_s = kernel_matrix(kernel, t.inputs);
  const Eigen::MatrixXd k_inv = k_s.inverse();
  const Eigen::MatrixXd h_tilde = design.entries.transpose() * k_inv * design.entries;
  const Eigen::MatrixXd c_tilde =
      h_tilde.inverse() * design.entries.transpose() * k_inv * t.outputs;
  const double chi2_tilde =
      (t.outputs.transpose() *
       (k_inv - k_inv * design.entries * h_tilde.inverse() *
                    design.entries.transpose() * k_inv) *
       t.outputs)
          .trace();

  CHECK((gpr.c_hat_tilde - c_tilde).cwiseAbs().maxCoeff() <=
        1e-9 * (1.0 + c_tilde.cwiseAbs().maxCoeff()));
  CHECK(gpr.chi2_tilde_min == doctest::Approx(chi2_tilde).epsilon(1e-9));
  CHECK((gpr.h_tilde_factor.matrix() - h_tilde).cwiseAbs().maxCoeff() <=
        1e-9 * h_tilde.cwiseAbs().maxCoeff());
}

TEST_CASE("predictive variance factor: interpolation, far field, clamps") {
  const TrainingSet t = training_1d(6, 17);
  const BasisSpec spec = unit_spec(1, 0);
  const Kernel kernel = se_kernel(1.8, {0.4}, 0.0);
  const GprPosterior gpr = fit_gpr(t, spec, kernel);

  // At a training input with zero nugget the factor vanishes.
  const GprPrediction at_node = gpr_predictive(gpr, t.inputs.row(2).transpose());
  CHECK(at_node.variance_factor <= 1e-8);

  // Far from every training input the factor approaches k(a, a).
  Eigen::MatrixXd far_t(3, 1);
  far_t << -0.9, -0.85, -0.8;
  TrainingSet far_train = t;
  far_train.inputs = far_t;
  far_train.outputs = t.outputs.topRows(3);
  const Kernel tight = se_kernel(1.8, {0.05}, 0.0);
  const GprPosterior far_gpr = fit_gpr(far_train, spec, tight);
  Eigen::VectorXd far(1);
  far << 0.9;  // more than 10 lengthscales from every node
  const GprPrediction far_pred = gpr_predictive(far_gpr, far);
  CHECK(std::abs(far_pred.variance_factor - 1.8) <= 1e-8);

  // Non-negative over random queries.
  std::mt19937_64 eng(19);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int rep = 0; rep < 100; ++rep) {
    Eigen::VectorXd a(1);
    a << u(eng);
    CHECK(gpr_predictive(gpr, a).variance_factor >= 0.0);
  }
}

TEST_CASE("kernel amplitude scaling: chi2 scales inversely, coefficients fixed") {
  const TrainingSet t = training_1d(9, 23);
  const BasisSpec spec = unit_spec(1, 1);
  const Kernel base = se_kernel(1.0, {0.6}, 1e-10);
  const double scale = 3.7;
  Kernel scaled = base;
  scaled.amplitude2 *= scale;
  scaled.nugget = base.effective_nugget() * scale;

  const GprPosterior g1 = fit_gpr(t, spec, base);
  const GprPosterior g2 = fit_gpr(t, spec, scaled);
  CHECK(g2.chi2_tilde_min == doctest::Approx(g1.chi2_tilde_min / scale).epsilon(1e-10));
  CHECK((g1.c_hat_tilde - g2.c_hat_tilde).cwiseAbs().maxCoeff() <=
        1e-10 * (1.0 + g1.c_hat_tilde.cwiseAbs().maxCoeff()));

  // The evidence is invariant under the amplitude rescaling.
  const EvidenceReport e1 = log_evidence_gpr(t, spec, base);
  const EvidenceReport e2 = log_evidence_gpr(t, spec, scaled);
  CHECK(e1.log_evidence == doctest::Approx(e2.log_evidence).epsilon(1e-9));
}

TEST_CASE("kernel failure modes") {
  const BasisSpec spec = unit_spec(1, 0);
  TrainingSet t;
  t.inputs = Eigen::MatrixXd::Constant(4, 1, 0.2);  // coincident points
  t.outputs = Eigen::MatrixXd::Ones(4, 1);
  const Kernel no_nugget = se_kernel(1.0, {0.5}, 0.0);
  CHECK_THROWS_AS(fit_gpr(t, spec, no_nugget), KernelSingularError);
}

TEST_CASE("theta grid validation and mixtures") {
  CHECK_THROWS_AS(ThetaGrid::make({}), ContractError);
  CHECK_THROWS_AS(ThetaGrid::make({{se_kernel(1.0, {0.5}), -0.5}}), ContractError);
  ThetaGrid grid = ThetaGrid::make({{se_kernel(1.0, {0.5}), 2.0},
                                    {se_kernel(1.0, {1.0}), 6.0}});
  CHECK(grid.points[0].weight == doctest::Approx(0.25));
  CHECK(grid.points[1].weight == doctest::Approx(0.75));

  const TrainingSet t = training_1d(10, 29);
  const BasisSpec spec = unit_spec(1, 1);
  Eigen::MatrixXd query(2, 1);
  query << -0.4, 0.35;

  // Single-point grid: identical to the fixed-kernel prediction.
  const Kernel kernel = se_kernel(1.2, {0.5}, 1e-10);
  const ThetaGrid single = ThetaGrid::make({{kernel, 1.0}});
  const MixturePredictive mix1 = marginalize_theta_predict(t, spec, single, query);
  const GprPosterior fixed = fit_gpr(t, spec, kernel);
  for (int q = 0; q < 2; ++q) {
    const GprPrediction p = gpr_predictive(fixed, query.row(q).transpose());
    CHECK(mix1.mean(q, 0) == doctest::Approx(p.mean[0]).epsilon(1e-12));
    CHECK(mix1.variance(q, 0) ==
          doctest::Approx(*p.coeff_var * p.variance_factor).epsilon(1e-10));
  }

  // Two identical kernels: still the fixed-kernel result.
  const ThetaGrid twin = ThetaGrid::make({{kernel, 0.5}, {kernel, 0.5}});
  const MixturePredictive mix2 = marginalize_theta_predict(t, spec, twin, query);
  CHECK((mix2.mean - mix1.mean).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((mix2.variance - mix1.variance).cwiseAbs().maxCoeff() <= 1e-10);

  // Different kernels: the mixture variance carries the mean-spread term.
  const Kernel other = se_kernel(1.2, {0.12}, 1e-10);
  const ThetaGrid both = ThetaGrid::make({{kernel, 0.4}, {other, 0.6}});
  const MixturePredictive mix3 = marginalize_theta_predict(t, spec, both, query);
  const GprPosterior fixed2 = fit_gpr(t, spec, other);
  for (int q = 0; q < 2; ++q) {
    const GprPrediction p1 = gpr_predictive(fixed, query.row(q).transpose());
    const GprPrediction p2 = gpr_predictive(fixed2, query.row(q).transpose());
    const double v1 = *p1.coeff_var * p1.variance_factor;
    const double v2 = *p2.coeff_var * p2.variance_factor;
    const double expected = 0.4 * v1 + 0.6 * v2 +
                            0.4 * 0.6 * (p1.mean[0] - p2.mean[0]) *
                                (p1.mean[0] - p2.mean[0]);
    CHECK(mix3.variance(q, 0) == doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("theta mixture propagation: reduction and failure aggregation") {
  const TrainingSet t = training_1d(12, 37);
  const BasisSpec spec = unit_spec(1, 1);
  std::mt19937_64 eng(39);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXd atoms(400, 1);
  for (int i = 0; i < 400; ++i) atoms(i, 0) = u(eng);
  const InputPosterior input = InputPosterior::uniform(std::move(atoms));

  const Kernel kernel = se_kernel(1.0, {0.7}, 1e-10);
  const ThetaGrid single = ThetaGrid::make({{kernel, 1.0}});
  const MixturePropagation mix = marginalize_theta_propagate(t, spec, single, input);
  const GprPosterior fixed = fit_gpr(t, spec, kernel);
  const PropagationResult direct = propagate_gpr(fixed, input, true);
  CHECK((mix.mean - direct.mean).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(mix.surrogate_term == doctest::Approx(direct.surrogate_term).epsilon(1e-12));
  CHECK(mix.theta_spread.cwiseAbs().maxCoeff() <= 1e-20);

  // White-kernel propagation reduces to the plain propagate path.
  const GprPosterior white = fit_gpr(t, spec, white_kernel(1));
  const PropagationResult white_prop = propagate_gpr(white, input, true);
  const CoefficientPosterior plain = fit(t, spec);
  const BasisMoments moments = basis_moments(spec, input);
  const PropagationResult plain_prop = propagate_covariance(plain, moments, true);
  CHECK((white_prop.mean - plain_prop.mean).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(white_prop.surrogate_term ==
        doctest::Approx(plain_prop.surrogate_term).epsilon(1e-10));
  CHECK(white_prop.cov_naive(0, 0) ==
        doctest::Approx(plain_prop.cov_naive(0, 0)).epsilon(1e-10));

  // A grid whose only point fails produces an aggregate error; a mixed grid
  // drops the bad point.
  TrainingSet coincident = t;
  coincident.inputs.setConstant(0.3);
  const ThetaGrid bad = ThetaGrid::make({{se_kernel(1.0, {0.5}, 0.0), 1.0}});
  CHECK_THROWS_AS(marginalize_theta_propagate(coincident, spec, bad, input),
                  AggregateError);
}

#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <numbers>
#include <random>

#include "suruq/basis.hpp"
#include "suruq/surrogate.hpp"

using namespace suruq;

namespace {

BasisSpec unit_spec(int n_params, int degree) {
  return make_total_degree_spec(degree, std::vector<Interval>(n_params, {-1.0, 1.0}));
}

TrainingSet linear_3pt() {
  TrainingSet t;
  t.inputs.resize(3, 1);
  t.inputs << -1.0, 0.0, 1.0;
  t.outputs.resize(3, 1);
  t.outputs << 0.0, 1.0, 2.0;
  return t;
}

// Quadratic data a^2 at 5 symmetric points; fits {P0, P1} with c = (0.5, 0),
// chi2_min = 0.875, sigma2_hat = 0.875 / ((5-2)*1 - 2) = 0.875.
TrainingSet quadratic_5pt() {
  TrainingSet t;
  t.inputs.resize(5, 1);
  t.inputs << -1.0, -0.5, 0.0, 0.5, 1.0;
  t.outputs.resize(5, 1);
  t.outputs << 1.0, 0.25, 0.0, 0.25, 1.0;
  return t;
}

TrainingSet random_training(int n_s, int n_a, int n_x, std::uint64_t seed,
                            double noise = 0.3) {
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);
  TrainingSet t;
  t.inputs.resize(n_s, n_a);
  for (int i = 0; i < n_s; ++i)
    for (int k = 0; k < n_a; ++k) t.inputs(i, k) = u(eng);
  t.outputs.resize(n_s, n_x);
  for (int i = 0; i < n_s; ++i)
    for (int x = 0; x < n_x; ++x)
      t.outputs(i, x) = 0.5 + 0.9 * t.inputs(i, 0) + 0.4 * x +
                        0.7 * std::sin(2.0 * t.inputs(i, 0) + x) + noise * n(eng);
  return t;
}

}  // namespace

TEST_CASE("chi2 hand oracles") {
  TrainingSet t = linear_3pt();
  const BasisSpec spec = unit_spec(1, 1);
  const DesignMatrix design = build_design_matrix(spec, t.inputs);

  Eigen::MatrixXd exact(2, 1);
  exact << 1.0, 1.0;
  CHECK(chi2(t, design, exact) == 0.0);

  t.outputs << 0.0, 1.0, 3.0;
  Eigen::MatrixXd c(2, 1);
  c << 4.0 / 3.0, 3.0 / 2.0;
  // Residuals (1/6, -1/3, 1/6) by hand.
  CHECK(chi2(t, design, c) == doctest::Approx(1.0 / 6.0).epsilon(1e-14));

  Eigen::MatrixXd wrong_shape(3, 1);
  CHECK_THROWS_AS(chi2(t, design, wrong_shape), ContractError);
}

TEST_CASE("fit reproduces the hand fixtures") {
  const BasisSpec spec = unit_spec(1, 1);

  const CoefficientPosterior lin = fit(linear_3pt(), spec);
  CHECK(lin.c_hat(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(lin.c_hat(1, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(lin.chi2_min <= 1e-28);
  CHECK_FALSE(lin.covariance_defined());  // (3-2)*1 - 2 < 0

  const CoefficientPosterior quad = fit(quadratic_5pt(), spec);
  CHECK(quad.c_hat(0, 0) == doctest::Approx(0.5).epsilon(1e-13));
  CHECK(std::abs(quad.c_hat(1, 0)) <= 1e-14);
  CHECK(quad.chi2_min == doctest::Approx(0.875).epsilon(1e-13));
  REQUIRE(quad.sigma2_hat.has_value());
  CHECK(*quad.sigma2_hat == doctest::Approx(0.875).epsilon(1e-13));
  // H = diag(5, 2.5) for this design.
  CHECK(quad.h_factor.matrix()(0, 0) == doctest::Approx(5.0));
  CHECK(quad.h_factor.matrix()(1, 1) == doctest::Approx(2.5));

  TrainingSet zeros = linear_3pt();
  zeros.outputs.setZero();
  const CoefficientPosterior z = fit(zeros, spec);
  CHECK(z.c_hat.cwiseAbs().maxCoeff() == 0.0);
  CHECK(z.chi2_min == 0.0);
}

TEST_CASE("fit rejects underdetermined and singular designs") {
  const BasisSpec spec = unit_spec(1, 2);
  TrainingSet two;
  two.inputs.resize(2, 1);
  two.inputs << -0.5, 0.5;
  two.outputs.resize(2, 1);
  two.outputs << 1.0, 2.0;
  CHECK_THROWS_AS(fit(two, spec), UnderdeterminedError);

  // All samples at one point: P1 and P2 columns are constant multiples of P0.
  TrainingSet degenerate;
  degenerate.inputs = Eigen::MatrixXd::Constant(5, 1, 0.25);
  degenerate.outputs = Eigen::MatrixXd::Constant(5, 1, 1.0);
  CHECK_THROWS_WITH_AS(fit(degenerate, spec), doctest::Contains("near-dependent"),
                       SingularDesignError);
}

TEST_CASE("training set validation names non-finite entries") {
  TrainingSet t = linear_3pt();
  t.outputs(1, 0) = std::numeric_limits<double>::quiet_NaN();
  CHECK_THROWS_WITH_AS(t.validate(), doctest::Contains("(1, 0)"), ContractError);
  t = linear_3pt();
  t.outputs.resize(2, 1);
  CHECK_THROWS_AS(t.validate(), ContractError);
}

TEST_CASE("coefficient covariance: delta structure and dof gate") {
  const BasisSpec spec = unit_spec(1, 1);
  const CoefficientPosterior quad = fit(quadratic_5pt(), spec);
  CHECK(coefficient_covariance(quad, 0, 0, 0, 0) ==
        doctest::Approx(0.875 / 5.0).epsilon(1e-13));
  CHECK(coefficient_covariance(quad, 1, 0, 1, 0) ==
        doctest::Approx(0.875 / 2.5).epsilon(1e-13));

  // Two sites: cross-site entries vanish exactly.
  TrainingSet two = random_training(8, 1, 2, 5);
  const CoefficientPosterior post = fit(two, spec);
  CHECK(coefficient_covariance(post, 0, 0, 1, 1) == 0.0);
  CHECK(coefficient_covariance(post, 1, 1, 0, 0) == 0.0);

  const CoefficientPosterior lin = fit(linear_3pt(), spec);
  CHECK_THROWS_AS(coefficient_covariance(lin, 0, 0, 0, 0), CovarianceUndefinedError);
}

TEST_CASE("coefficient covariance is symmetric and assembles to a PSD matrix") {
  std::mt19937_64 eng(17);
  for (int rep = 0; rep < 20; ++rep) {
    const int n_x = 1 + static_cast<int>(eng() % 3);
    const TrainingSet t = random_training(10 + static_cast<int>(eng() % 6), 1, n_x,
                                          eng());
    const BasisSpec spec = unit_spec(1, 2);
    const CoefficientPosterior post = fit(t, spec);
    const int n_p = post.dims.n_p;
    const long n_bx = post.dims.n_bx();
    Eigen::MatrixXd cov(n_bx, n_bx);
    for (int x = 0; x < n_x; ++x)
      for (int nu = 0; nu < n_p; ++nu)
        for (int xp = 0; xp < n_x; ++xp)
          for (int nup = 0; nup < n_p; ++nup)
            cov(x * n_p + nu, xp * n_p + nup) =
                coefficient_covariance(post, nu, x, nup, xp);
    CHECK((cov - cov.transpose()).cwiseAbs().maxCoeff() <= 1e-15);
    const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(cov);
    CHECK(es.eigenvalues().minCoeff() >= -1e-12 * es.eigenvalues().maxCoeff());
  }
}

TEST_CASE("log evidence components and validity gates") {
  const BasisSpec spec = unit_spec(1, 1);
  const TrainingSet t = random_training(8, 1, 1, 3);
  const EvidenceReport rep = log_evidence(t, spec);
  // N_bx = 2: the solid angle in two dimensions is 2 pi.
  CHECK(rep.n_bx == 2);
  CHECK(rep.components.log_solid_angle ==
        doctest::Approx(std::log(2.0 * std::numbers::pi)).epsilon(1e-14));
  const double sum = rep.components.log_solid_angle + rep.components.neg_half_logdet_h +
                     rep.components.chi2_exponent_term + rep.components.log_gamma_terms +
                     rep.components.log_kernel_norm;
  CHECK(rep.log_evidence == doctest::Approx(sum).epsilon(1e-12));

  // N_sx <= N_bx: undefined.
  TrainingSet square = random_training(2, 1, 1, 4);
  CHECK_THROWS_AS(log_evidence(square, spec), EvidenceUndefinedError);

  // Exact interpolation: chi2 underflows.
  TrainingSet exact = linear_3pt();
  exact.inputs.resize(3, 1);
  exact.inputs << -1.0, 0.0, 1.0;
  exact.outputs.resize(3, 1);
  exact.outputs << 0.0, 1.0, 2.0;
  CHECK_THROWS_AS(log_evidence(exact, spec), InterpolationDegenerateError);
}

TEST_CASE("basis recombination shifts the evidence by -log|det T|") {
  const TrainingSet t = random_training(12, 1, 1, 9);
  const BasisSpec spec = unit_spec(1, 2);
  const DesignMatrix design = build_design_matrix(spec, t.inputs);

  Eigen::MatrixXd recomb(3, 3);
  recomb << 1.0, 0.3, -0.2, 0.0, 2.0, 0.5, 0.0, 0.0, -0.7;
  const LinearFit base = solve_least_squares(design.entries, t.outputs);
  const LinearFit mixed = solve_least_squares(design.entries * recomb, t.outputs);
  const Dims dims{12, 3, 1};
  const double lhs = evidence_from_fit(mixed.h_factor, mixed.chi2_min, dims).log_evidence;
  const double rhs = evidence_from_fit(base.h_factor, base.chi2_min, dims).log_evidence;
  CHECK(lhs - rhs ==
        doctest::Approx(-std::log(std::abs(recomb.determinant()))).epsilon(1e-10));
  CHECK(mixed.chi2_min == doctest::Approx(base.chi2_min).epsilon(1e-12));
}

TEST_CASE("basis-change equivariance of coefficients and predictions") {
  std::mt19937_64 eng(21);
  std::normal_distribution<double> n(0.0, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    const TrainingSet t = random_training(14, 1, 2, eng());
    const BasisSpec spec = unit_spec(1, 2);
    const DesignMatrix design = build_design_matrix(spec, t.inputs);
    Eigen::MatrixXd recomb(3, 3);
    do {
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) recomb(i, j) = n(eng);
    } while (std::abs(recomb.determinant()) < 0.1);

    const LinearFit base = solve_least_squares(design.entries, t.outputs);
    const LinearFit mixed = solve_least_squares(design.entries * recomb, t.outputs);
    // c' = T^{-1} c for the recombined columns Phi' = T^T Phi.
    const Eigen::MatrixXd expected = recomb.inverse() * base.c_hat;
    CHECK((mixed.c_hat - expected).cwiseAbs().maxCoeff() <=
          1e-10 * (1.0 + expected.cwiseAbs().maxCoeff()));
    CHECK(mixed.chi2_min == doctest::Approx(base.chi2_min).epsilon(1e-12));
    // Identical predictions at the training points.
    const Eigen::MatrixXd pred_base = design.entries * base.c_hat;
    const Eigen::MatrixXd pred_mixed = design.entries * recomb * mixed.c_hat;
    CHECK((pred_base - pred_mixed).cwiseAbs().maxCoeff() <=
          1e-10 * (1.0 + pred_base.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("permutation invariance of fit and evidence") {
  const TrainingSet t = random_training(10, 2, 2, 31);
  const BasisSpec spec = unit_spec(2, 1);
  const CoefficientPosterior base = fit(t, spec);
  const EvidenceReport base_ev = log_evidence(t, spec);

  std::mt19937_64 eng(33);
  for (int rep = 0; rep < 10; ++rep) {
    std::vector<int> rows(10);
    std::iota(rows.begin(), rows.end(), 0);
    std::shuffle(rows.begin(), rows.end(), eng);
    TrainingSet permuted = t;
    for (int i = 0; i < 10; ++i) {
      permuted.inputs.row(i) = t.inputs.row(rows[static_cast<size_t>(i)]);
      permuted.outputs.row(i) = t.outputs.row(rows[static_cast<size_t>(i)]);
    }
    const CoefficientPosterior post = fit(permuted, spec);
    CHECK((post.c_hat - base.c_hat).cwiseAbs().maxCoeff() <=
          1e-12 * (1.0 + base.c_hat.cwiseAbs().maxCoeff()));
    CHECK(post.chi2_min == doctest::Approx(base.chi2_min).epsilon(1e-12));
    CHECK(log_evidence(permuted, spec).log_evidence ==
          doctest::Approx(base_ev.log_evidence).epsilon(1e-12));
  }

  // Site permutation: columns of c_hat permute with the labels.
  TrainingSet swapped = t;
  swapped.outputs.col(0) = t.outputs.col(1);
  swapped.outputs.col(1) = t.outputs.col(0);
  const CoefficientPosterior post = fit(swapped, spec);
  CHECK((post.c_hat.col(0) - base.c_hat.col(1)).cwiseAbs().maxCoeff() <= 1e-14);
  CHECK(post.chi2_min == doctest::Approx(base.chi2_min).epsilon(1e-12));
}

TEST_CASE("chi2_min is zero exactly when the data lie in the design span") {
  std::mt19937_64 eng(41);
  std::normal_distribution<double> n(0.0, 1.0);
  const BasisSpec spec = unit_spec(1, 2);
  for (int rep = 0; rep < 20; ++rep) {
    const TrainingSet shell = random_training(9, 1, 1, eng());
    const DesignMatrix design = build_design_matrix(spec, shell.inputs);

    TrainingSet in_span = shell;
    Eigen::MatrixXd c(3, 1);
    for (int i = 0; i < 3; ++i) c(i, 0) = n(eng);
    in_span.outputs = design.entries * c;
    const CoefficientPosterior exact = fit(in_span, spec);
    CHECK(exact.chi2_min <= 1e-10 * in_span.outputs.squaredNorm());

    TrainingSet off_span = in_span;
    off_span.outputs(4, 0) += 2.0;  // deliberate departure from the span
    const CoefficientPosterior rough = fit(off_span, spec);
    CHECK(rough.chi2_min > 1e-10 * off_span.outputs.squaredNorm());
  }
}

TEST_CASE("duplicating a training row equals doubling its weight in the normal equations") {
  const TrainingSet t = random_training(8, 1, 1, 51);
  const BasisSpec spec = unit_spec(1, 2);
  const DesignMatrix design = build_design_matrix(spec, t.inputs);

  TrainingSet dup = t;
  dup.inputs.conservativeResize(9, 1);
  dup.outputs.conservativeResize(9, 1);
  dup.inputs.row(8) = t.inputs.row(3);
  dup.outputs.row(8) = t.outputs.row(3);
  const CoefficientPosterior post = fit(dup, spec);

  Eigen::VectorXd w = Eigen::VectorXd::Ones(8);
  w[3] = 2.0;
  const Eigen::MatrixXd mw = design.entries.transpose() * w.asDiagonal();
  const Eigen::MatrixXd c_weighted =
      (mw * design.entries).ldlt().solve(mw * t.outputs);
  CHECK((post.c_hat - c_weighted).cwiseAbs().maxCoeff() <=
        1e-11 * (1.0 + c_weighted.cwiseAbs().maxCoeff()));
}

TEST_CASE("predict_mean anchors") {
  const BasisSpec constant = unit_spec(1, 0);
  TrainingSet t;
  t.inputs.resize(4, 1);
  t.inputs << -0.5, 0.0, 0.25, 1.0;
  t.outputs = Eigen::MatrixXd::Constant(4, 1, 3.25);
  const CoefficientPosterior c = fit(t, constant);
  Eigen::VectorXd a(1);
  a << 0.77;
  CHECK(predict_mean(c, a)[0] == doctest::Approx(3.25).epsilon(1e-14));

  const CoefficientPosterior lin = fit(linear_3pt(), unit_spec(1, 1));
  a << 0.5;
  CHECK(predict_mean(lin, a)[0] == doctest::Approx(1.5).epsilon(1e-13));
  // Interpolation property at a training input of an exactly fitted model.
  a << -1.0;
  CHECK(predict_mean(lin, a)[0] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("compare_models ranks and normalizes") {
  const BasisSpec spec = unit_spec(1, 1);
  const TrainingSet t = random_training(12, 1, 1, 61);

  const auto equal = compare_models(t, {spec, spec});
  CHECK(equal[0].posterior_prob == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(equal[1].posterior_prob == doctest::Approx(0.5).epsilon(1e-12));

  // Quadratic data with a 1% perturbation: the degree-2 model wins.
  std::mt19937_64 eng(63);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> n(0.0, 1.0);
  TrainingSet quad;
  quad.inputs.resize(40, 1);
  quad.outputs.resize(40, 1);
  for (int i = 0; i < 40; ++i) {
    const double a = u(eng);
    quad.inputs(i, 0) = a;
    quad.outputs(i, 0) = 1.2 - 0.8 * a + 1.5 * a * a + 0.01 * n(eng);
  }
  std::vector<BasisSpec> specs;
  for (int d = 0; d <= 4; ++d) specs.push_back(unit_spec(1, d));
  const auto ranked = compare_models(quad, specs);
  CHECK(ranked[0].spec_id == 2);
  CHECK(ranked[0].status == "ok");

  // A spec with N_sx <= N_bx is excluded with its own status.
  TrainingSet tiny = random_training(4, 1, 1, 65);
  const auto gated = compare_models(tiny, {unit_spec(1, 0), unit_spec(1, 3)});
  CHECK(gated[0].spec_id == 0);
  CHECK(gated[1].spec_id == 1);
  CHECK(gated[1].status != "ok");
  CHECK(gated[1].posterior_prob == 0.0);
}

TEST_CASE("sample_coefficients reproduces the posterior moments") {
  const int n = 1000000;
  TrainingSet t = random_training(12, 1, 2, 71);
  const BasisSpec spec = unit_spec(1, 1);
  const CoefficientPosterior post = fit(t, spec);

  CHECK(sample_coefficients(post, 0, 1).empty());
  const auto draws = sample_coefficients(post, n, 12345);

  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(2, 2);
  for (const auto& c : draws) mean += c;
  mean /= static_cast<double>(n);
  for (int nu = 0; nu < 2; ++nu)
    for (int x = 0; x < 2; ++x) {
      const double sd = std::sqrt(coefficient_covariance(post, nu, x, nu, x) /
                                  static_cast<double>(n));
      CHECK(std::abs(mean(nu, x) - post.c_hat(nu, x)) <= 4.0 * sd);
    }

  // Covariance within 2% relative on the diagonal blocks, zero cross-site.
  const long n_bx = post.dims.n_bx();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(n_bx, n_bx);
  for (const auto& c : draws) {
    Eigen::VectorXd flat(n_bx);
    for (int x = 0; x < 2; ++x)
      for (int nu = 0; nu < 2; ++nu) flat[x * 2 + nu] = c(nu, x) - post.c_hat(nu, x);
    cov.noalias() += flat * flat.transpose();
  }
  cov /= static_cast<double>(n);
  for (int x = 0; x < 2; ++x)
    for (int nu = 0; nu < 2; ++nu)
      for (int xp = 0; xp < 2; ++xp)
        for (int nup = 0; nup < 2; ++nup) {
          const double expected = coefficient_covariance(post, nu, x, nup, xp);
          const double got = cov(x * 2 + nu, xp * 2 + nup);
          if (x == xp)
            CHECK(got == doctest::Approx(expected).epsilon(0.02));
          else
            CHECK(std::abs(got) <=
                  0.02 * std::sqrt(cov(x * 2 + nu, x * 2 + nu) *
                                   cov(xp * 2 + nup, xp * 2 + nup)));
        }

  // Deterministic under a fixed seed.
  const auto again = sample_coefficients(post, 3, 12345);
  CHECK(again[2] == draws[2]);

  const CoefficientPosterior lin = fit(linear_3pt(), spec);
  CHECK_THROWS_AS(sample_coefficients(lin, 5, 1), CovarianceUndefinedError);
}

#include "suruq/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "suruq/rng.hpp"

namespace suruq {

namespace {

constexpr double kConditionLimit = 1e12;
constexpr double kChi2Floor = 1e-300;

std::string entry_name(Eigen::Index i, Eigen::Index j) {
  std::ostringstream s;
  s << "(" << i << ", " << j << ")";
  return s.str();
}

}  // namespace

void TrainingSet::validate() const {
  if (inputs.rows() < 1) throw ContractError("TrainingSet: needs at least one sample");
  if (outputs.rows() != inputs.rows()) {
    std::ostringstream msg;
    msg << "TrainingSet: inputs have " << inputs.rows() << " rows, outputs have "
        << outputs.rows();
    throw ContractError(msg.str());
  }
  if (outputs.cols() < 1) throw ContractError("TrainingSet: needs at least one site");
  for (Eigen::Index i = 0; i < inputs.rows(); ++i)
    for (Eigen::Index j = 0; j < inputs.cols(); ++j)
      if (!std::isfinite(inputs(i, j)))
        throw ContractError("TrainingSet: non-finite input at " + entry_name(i, j));
  for (Eigen::Index i = 0; i < outputs.rows(); ++i)
    for (Eigen::Index j = 0; j < outputs.cols(); ++j)
      if (!std::isfinite(outputs(i, j)))
        throw ContractError("TrainingSet: non-finite output at " + entry_name(i, j));
  if (!site_labels.empty() && site_labels.size() != static_cast<size_t>(outputs.cols()))
    throw ContractError("TrainingSet: site_labels length does not match output columns");
}

std::vector<std::string> TrainingSet::labels() const {
  if (!site_labels.empty()) return site_labels;
  std::vector<std::string> out;
  out.reserve(static_cast<size_t>(n_sites()));
  for (int x = 0; x < n_sites(); ++x) out.push_back("site" + std::to_string(x));
  return out;
}

SpdFactor SpdFactor::factor(Eigen::MatrixXd h, const std::string& context) {
  SpdFactor f;
  f.h_ = std::move(h);
  if (f.h_.rows() != f.h_.cols())
    throw ContractError(context + ": matrix is not square");
  f.llt_.compute(f.h_);
  if (f.llt_.info() != Eigen::Success)
    throw SingularDesignError(context + ": matrix is not positive definite");
  return f;
}

double SpdFactor::logdet() const {
  const auto& l = llt_.matrixLLT();
  double sum = 0.0;
  for (Eigen::Index i = 0; i < l.rows(); ++i) sum += std::log(l(i, i));
  return 2.0 * sum;
}

double SpdFactor::inverse_entry(int i, int j) const {
  Eigen::VectorXd e = Eigen::VectorXd::Zero(h_.rows());
  e[j] = 1.0;
  return llt_.solve(e)[i];
}

double SpdFactor::inverse_trace_product(const Eigen::MatrixXd& g) const {
  return llt_.solve(g).trace();
}

Eigen::MatrixXd SpdFactor::apply_sqrt_inverse(const Eigen::MatrixXd& u) const {
  return llt_.matrixL().transpose().solve(u);
}

Eigen::MatrixXd SpdFactor::whiten(const Eigen::MatrixXd& b) const {
  return llt_.matrixL().solve(b);
}

LinearFit solve_least_squares(const Eigen::MatrixXd& design,
                              const Eigen::MatrixXd& outputs) {
  const Eigen::Index n_s = design.rows();
  const Eigen::Index n_p = design.cols();
  if (outputs.rows() != n_s)
    throw ContractError("solve_least_squares: design and output row counts differ");
  if (n_p < 1) throw ContractError("solve_least_squares: design has no columns");
  if (n_s < n_p) {
    std::ostringstream msg;
    msg << "underdetermined fit: " << n_s << " samples for " << n_p
        << " basis functions";
    throw UnderdeterminedError(msg.str());
  }

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  const auto& r = qr.matrixR();
  const double r_max = std::abs(r(0, 0));
  const double r_min = std::abs(r(n_p - 1, n_p - 1));
  const double cond = r_min > 0.0 ? r_max / r_min
                                  : std::numeric_limits<double>::infinity();
  if (!(cond <= kConditionLimit)) {
    // Columns whose pivot fell below the rank threshold, in original order.
    std::ostringstream msg;
    msg << "singular design (condition estimate " << cond
        << " > 1e12); near-dependent columns:";
    const auto perm = qr.colsPermutation().indices();
    for (Eigen::Index k = 0; k < n_p; ++k)
      if (std::abs(r(k, k)) * kConditionLimit < r_max) msg << " " << perm[k];
    throw SingularDesignError(msg.str());
  }

  LinearFit out;
  out.condition_estimate = cond;
  out.c_hat = qr.solve(outputs);
  out.chi2_min = (outputs - design * out.c_hat).squaredNorm();
  // H is assembled and Cholesky-factored here (rather than reusing the QR
  // triangle) so that a posterior rebuilt from a serialized H reproduces
  // downstream solves bit for bit.
  Eigen::MatrixXd h = design.transpose() * design;
  h = ((h + h.transpose()) * 0.5).eval();
  out.h_factor = SpdFactor::factor(std::move(h), "design Gram matrix");
  return out;
}

double chi2(const TrainingSet& training, const DesignMatrix& design,
            const Eigen::MatrixXd& coeffs) {
  training.validate();
  if (design.entries.rows() != training.outputs.rows())
    throw ContractError("chi2: design rows do not match training samples");
  if (coeffs.rows() != design.entries.cols() || coeffs.cols() != training.outputs.cols())
    throw ContractError("chi2: coefficient matrix must be N_p x N_x");
  return (training.outputs - design.entries * coeffs).squaredNorm();
}

CoefficientPosterior fit(const TrainingSet& training, const BasisSpec& spec) {
  training.validate();
  spec.validate();
  const DesignMatrix design = build_design_matrix(spec, training.inputs);
  LinearFit core = solve_least_squares(design.entries, training.outputs);

  CoefficientPosterior post;
  post.c_hat = std::move(core.c_hat);
  post.h_factor = std::move(core.h_factor);
  post.chi2_min = core.chi2_min;
  post.condition_estimate = core.condition_estimate;
  post.dims = {training.n_samples(), spec.n_basis(), training.n_sites()};
  post.spec = spec;
  post.site_labels = training.labels();
  if (post.dims.sigma2_denominator() > 0)
    post.sigma2_hat = post.chi2_min / static_cast<double>(post.dims.sigma2_denominator());
  return post;
}

double coefficient_covariance(const CoefficientPosterior& post, int nu, int x, int nu_p,
                              int x_p) {
  const Dims& d = post.dims;
  if (nu < 0 || nu >= d.n_p || nu_p < 0 || nu_p >= d.n_p || x < 0 || x >= d.n_x ||
      x_p < 0 || x_p >= d.n_x)
    throw ContractError("coefficient_covariance: index out of range");
  if (!post.covariance_defined()) {
    std::ostringstream msg;
    msg << "coefficient covariance undefined: (N_s - N_p) N_x - 2 = "
        << d.sigma2_denominator() << " <= 0 (mean remains available)";
    throw CovarianceUndefinedError(msg.str());
  }
  if (x != x_p) return 0.0;
  return *post.sigma2_hat * post.h_factor.inverse_entry(nu, nu_p);
}

EvidenceReport evidence_from_fit(const SpdFactor& h_factor, double chi2_min, Dims dims,
                                 double logdet_kernel) {
  const long n_sx = dims.n_sx();
  const long n_bx = dims.n_bx();
  if (n_sx <= n_bx) {
    std::ostringstream msg;
    msg << "evidence undefined: N_sx = " << n_sx << " <= N_bx = " << n_bx;
    throw EvidenceUndefinedError(msg.str());
  }
  if (chi2_min < kChi2Floor)
    throw InterpolationDegenerateError(
        "evidence degenerate: chi2_min underflowed; the surrogate interpolates the "
        "data exactly and the noise scale cannot be estimated");

  EvidenceReport rep;
  rep.n_sx = n_sx;
  rep.n_bx = n_bx;
  auto& c = rep.components;
  const double half_bx = 0.5 * static_cast<double>(n_bx);
  const double half_rest = 0.5 * static_cast<double>(n_sx - n_bx);
  c.log_solid_angle = std::numbers::ln2 + half_bx * std::log(std::numbers::pi) -
                      std::lgamma(half_bx);
  c.neg_half_logdet_h = -0.5 * static_cast<double>(dims.n_x) * h_factor.logdet();
  c.chi2_exponent_term = -half_rest * std::log(chi2_min);
  c.log_gamma_terms = std::lgamma(half_bx) + std::lgamma(half_rest) -
                      std::lgamma(0.5 * static_cast<double>(n_sx));
  c.log_kernel_norm = -0.5 * static_cast<double>(dims.n_x) * logdet_kernel;
  rep.log_evidence = c.log_solid_angle + c.neg_half_logdet_h + c.chi2_exponent_term +
                     c.log_gamma_terms + c.log_kernel_norm;
  return rep;
}

EvidenceReport log_evidence(const TrainingSet& training, const BasisSpec& spec) {
  training.validate();
  spec.validate();
  const Dims dims{training.n_samples(), spec.n_basis(), training.n_sites()};
  if (dims.n_sx() <= dims.n_bx()) {
    std::ostringstream msg;
    msg << "evidence undefined: N_sx = " << dims.n_sx() << " <= N_bx = " << dims.n_bx();
    throw EvidenceUndefinedError(msg.str());
  }
  const DesignMatrix design = build_design_matrix(spec, training.inputs);
  const LinearFit core = solve_least_squares(design.entries, training.outputs);
  return evidence_from_fit(core.h_factor, core.chi2_min, dims);
}

Eigen::VectorXd predict_mean(const CoefficientPosterior& post, const Eigen::VectorXd& a) {
  return post.c_hat.transpose() * eval_basis(post.spec, a);
}

std::vector<ModelComparison> compare_models(const TrainingSet& training,
                                            const std::vector<BasisSpec>& specs) {
  if (specs.size() < 2)
    throw ContractError("compare_models: needs at least two candidate specs");

  std::vector<ModelComparison> rows;
  rows.reserve(specs.size());
  for (size_t id = 0; id < specs.size(); ++id) {
    ModelComparison row;
    row.spec_id = static_cast<int>(id);
    row.n_basis = specs[id].n_basis();
    try {
      row.log_evidence = log_evidence(training, specs[id]).log_evidence;
      row.status = "ok";
    } catch (const Error& e) {
      row.status = e.what();
    }
    rows.push_back(std::move(row));
  }

  double max_log = -std::numeric_limits<double>::infinity();
  for (const auto& row : rows)
    if (row.log_evidence) max_log = std::max(max_log, *row.log_evidence);
  if (!std::isfinite(max_log))
    throw AggregateError("compare_models: every candidate spec failed");

  double denom = 0.0;
  for (const auto& row : rows)
    if (row.log_evidence) denom += std::exp(*row.log_evidence - max_log);
  for (auto& row : rows)
    if (row.log_evidence)
      row.posterior_prob = std::exp(*row.log_evidence - max_log) / denom;

  std::stable_sort(rows.begin(), rows.end(), [](const ModelComparison& a,
                                                const ModelComparison& b) {
    if (a.log_evidence.has_value() != b.log_evidence.has_value())
      return a.log_evidence.has_value();
    if (!a.log_evidence) return a.spec_id < b.spec_id;
    if (*a.log_evidence != *b.log_evidence) return *a.log_evidence > *b.log_evidence;
    if (a.n_basis != b.n_basis) return a.n_basis < b.n_basis;
    return a.spec_id < b.spec_id;
  });
  return rows;
}

std::vector<Eigen::MatrixXd> sample_coefficients(const CoefficientPosterior& post, int n,
                                                 std::uint64_t seed) {
  if (n < 0) throw ContractError("sample_coefficients: negative draw count");
  if (!post.covariance_defined()) {
    std::ostringstream msg;
    msg << "sample_coefficients: covariance undefined, (N_s - N_p) N_x - 2 = "
        << post.dims.sigma2_denominator() << " <= 0";
    throw CovarianceUndefinedError(msg.str());
  }
  const int n_p = post.dims.n_p;
  const int n_x = post.dims.n_x;
  const double nu = static_cast<double>(post.dims.dof());

  Rng rng(seed);
  std::vector<Eigen::MatrixXd> draws;
  draws.reserve(static_cast<size_t>(n));
  Eigen::MatrixXd u(n_p, n_x);
  for (int k = 0; k < n; ++k) {
    for (int i = 0; i < n_p; ++i)
      for (int j = 0; j < n_x; ++j) u(i, j) = rng.normal();
    const double g = rng.chi_square(nu);
    const double scale = std::sqrt(post.chi2_min / g);
    draws.push_back(post.c_hat + scale * post.h_factor.apply_sqrt_inverse(u));
  }
  return draws;
}

}  // namespace suruq

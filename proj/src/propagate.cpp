#include "suruq/propagate.hpp"

#include <cmath>
#include <iostream>
#include <limits>
#include <sstream>
#include <thread>

namespace suruq {

namespace {

constexpr int kMomentBlock = 2048;
constexpr double kMaxClampedWeightShare = 0.01;

struct MomentPartial {
  Eigen::VectorXd g;
  Eigen::MatrixXd gg;
  long n_clamped = 0;
  double clamped_weight = 0.0;
};

MomentPartial combine(const MomentPartial& a, const MomentPartial& b) {
  MomentPartial out;
  out.g = a.g + b.g;
  out.gg = a.gg + b.gg;
  out.n_clamped = a.n_clamped + b.n_clamped;
  out.clamped_weight = a.clamped_weight + b.clamped_weight;
  return out;
}

MomentPartial accumulate_block(const BasisSpec& spec, const InputPosterior& input,
                               int begin, int end) {
  MomentPartial p;
  const int n_p = spec.n_basis();
  p.g = Eigen::VectorXd::Zero(n_p);
  p.gg = Eigen::MatrixXd::Zero(n_p, n_p);
  for (int j = begin; j < end; ++j) {
    bool clamped = false;
    const Eigen::VectorXd phi =
        eval_basis_clamped(spec, input.samples.row(j).transpose(), &clamped);
    const double w = input.weights[j];
    if (clamped) {
      ++p.n_clamped;
      p.clamped_weight += w;
    }
    p.g.noalias() += w * phi;
    p.gg.noalias() += w * (phi * phi.transpose());
  }
  return p;
}

bool specs_match(const BasisSpec& a, const BasisSpec& b) {
  if (a.family != b.family || a.indices != b.indices ||
      a.domain.size() != b.domain.size())
    return false;
  for (size_t k = 0; k < a.domain.size(); ++k)
    if (a.domain[k].lo != b.domain[k].lo || a.domain[k].hi != b.domain[k].hi)
      return false;
  return true;
}

void require_matching_spec(const CoefficientPosterior& post, const BasisMoments& moments,
                           const char* op) {
  if (!specs_match(post.spec, moments.spec))
    throw ContractError(std::string(op) +
                        ": posterior and moments were built for different basis specs");
}

}  // namespace

InputPosterior InputPosterior::from_samples(Eigen::MatrixXd samples,
                                            Eigen::VectorXd weights) {
  if (samples.rows() < 1)
    throw ContractError("InputPosterior: needs at least one sample");
  if (weights.size() != samples.rows())
    throw ContractError("InputPosterior: weight count does not match sample count");
  for (Eigen::Index i = 0; i < samples.rows(); ++i)
    for (Eigen::Index j = 0; j < samples.cols(); ++j)
      if (!std::isfinite(samples(i, j))) {
        std::ostringstream msg;
        msg << "InputPosterior: non-finite sample entry (" << i << ", " << j << ")";
        throw ContractError(msg.str());
      }
  double sum = 0.0;
  for (Eigen::Index i = 0; i < weights.size(); ++i) {
    if (!std::isfinite(weights[i]) || weights[i] < 0.0) {
      std::ostringstream msg;
      msg << "InputPosterior: weight " << i << " is negative or non-finite";
      throw ContractError(msg.str());
    }
    sum += weights[i];
  }
  if (sum <= 0.0) throw ContractError("InputPosterior: weights sum to zero");
  if (std::abs(sum - 1.0) > 1e-6)
    std::cerr << "warning: input-posterior weights sum to " << sum
              << "; renormalizing\n";
  if (std::abs(sum - 1.0) > 1e-12) weights /= sum;

  InputPosterior out;
  out.samples = std::move(samples);
  out.weights = std::move(weights);
  return out;
}

InputPosterior InputPosterior::uniform(Eigen::MatrixXd samples) {
  const Eigen::Index n = samples.rows();
  return from_samples(std::move(samples),
                      Eigen::VectorXd::Constant(n, 1.0 / static_cast<double>(n)));
}

BasisMoments basis_moments(const BasisSpec& spec, const InputPosterior& input,
                           int threads) {
  spec.validate();
  if (input.samples.cols() != spec.n_params())
    throw ContractError("basis_moments: sample dimension does not match basis");
  if (threads < 1) threads = 1;

  const int n_j = input.n_samples();
  const int n_blocks = (n_j + kMomentBlock - 1) / kMomentBlock;
  std::vector<MomentPartial> partials(static_cast<size_t>(n_blocks));

  auto run_blocks = [&](int first, int stride) {
    for (int b = first; b < n_blocks; b += stride)
      partials[static_cast<size_t>(b)] = accumulate_block(
          spec, input, b * kMomentBlock, std::min(n_j, (b + 1) * kMomentBlock));
  };
  if (threads == 1 || n_blocks == 1) {
    run_blocks(0, 1);
  } else {
    std::vector<std::thread> pool;
    const int n_workers = std::min(threads, n_blocks);
    pool.reserve(static_cast<size_t>(n_workers));
    for (int t = 0; t < n_workers; ++t) pool.emplace_back(run_blocks, t, n_workers);
    for (auto& th : pool) th.join();
  }

  // Pairwise combination in fixed block order keeps the result independent
  // of the thread count.
  int len = n_blocks;
  while (len > 1) {
    const int half = len / 2;
    for (int i = 0; i < half; ++i)
      partials[static_cast<size_t>(i)] =
          combine(partials[static_cast<size_t>(2 * i)],
                  partials[static_cast<size_t>(2 * i + 1)]);
    if (len % 2 == 1) partials[static_cast<size_t>(half)] = partials[static_cast<size_t>(len - 1)];
    len = half + len % 2;
  }
  MomentPartial total = std::move(partials[0]);

  if (total.clamped_weight > kMaxClampedWeightShare) {
    std::ostringstream msg;
    msg << "basis_moments: " << total.clamped_weight * 100.0
        << "% of input-posterior weight lies outside the basis domain (limit 1%); "
           "enlarge the domain box and refit";
    throw DomainCoverageError(msg.str());
  }

  BasisMoments out;
  out.g_vec = std::move(total.g);
  out.g_mat = std::move(total.gg);
  out.n_clamped = total.n_clamped;
  out.clamped_weight = total.clamped_weight;
  out.spec = spec;
  return out;
}

BasisMoments exact_basis_moments(const BasisSpec& spec, Eigen::VectorXd g_vec,
                                 Eigen::MatrixXd g_mat) {
  spec.validate();
  if (g_vec.size() != spec.n_basis() || g_mat.rows() != spec.n_basis() ||
      g_mat.cols() != spec.n_basis())
    throw ContractError("exact_basis_moments: moment dimensions do not match basis");
  BasisMoments out;
  out.g_vec = std::move(g_vec);
  out.g_mat = std::move(g_mat);
  out.spec = spec;
  return out;
}

Eigen::VectorXd propagate_mean(const CoefficientPosterior& post,
                               const BasisMoments& moments) {
  require_matching_spec(post, moments, "propagate_mean");
  return post.c_hat.transpose() * moments.g_vec;
}

PropagationResult propagate_covariance(const CoefficientPosterior& post,
                                       const BasisMoments& moments,
                                       bool include_surrogate, double epsilon) {
  require_matching_spec(post, moments, "propagate_covariance");
  if (!(std::isfinite(epsilon) && epsilon > 0.0))
    throw ContractError("propagate_covariance: epsilon must be finite and positive");

  const int n_x = post.dims.n_x;
  PropagationResult res;
  res.epsilon = epsilon;
  res.mean = post.c_hat.transpose() * moments.g_vec;
  const Eigen::MatrixXd second = post.c_hat.transpose() * moments.g_mat * post.c_hat;
  res.cov_naive = second - res.mean * res.mean.transpose();
  res.cov_total = res.cov_naive;
  res.surrogate_share = Eigen::VectorXd::Zero(n_x);
  res.trust_ratio = Eigen::VectorXd::Zero(n_x);
  res.trust_ratio_centered = Eigen::VectorXd::Zero(n_x);
  res.trustworthy.assign(static_cast<size_t>(n_x), true);

  if (!include_surrogate) return res;
  if (!post.covariance_defined()) {
    std::ostringstream msg;
    msg << "covariance undefined: (N_s - N_p) N_x - 2 = "
        << post.dims.sigma2_denominator()
        << " <= 0; returning the naive result only";
    res.surrogate_defined = false;
    res.surrogate_status = msg.str();
    return res;
  }

  res.surrogate_term = *post.sigma2_hat * post.h_factor.inverse_trace_product(moments.g_mat);
  res.cov_total.diagonal().array() += res.surrogate_term;
  const double inf = std::numeric_limits<double>::infinity();
  for (int x = 0; x < n_x; ++x) {
    const double total = res.cov_total(x, x);
    res.surrogate_share[x] = total > 0.0 ? res.surrogate_term / total : 0.0;
    const double denom = second(x, x);
    res.trust_ratio[x] = denom > 0.0 ? res.surrogate_term / denom
                         : res.surrogate_term == 0.0 ? 0.0 : inf;
    const double centered = res.cov_naive(x, x);
    res.trust_ratio_centered[x] = centered > 0.0 ? res.surrogate_term / centered
                                  : res.surrogate_term == 0.0 ? 0.0 : inf;
    res.trustworthy[static_cast<size_t>(x)] = res.trust_ratio[x] < epsilon;
  }
  return res;
}

TrustReport trust_ratio(const CoefficientPosterior& post, const BasisMoments& moments,
                        double epsilon) {
  require_matching_spec(post, moments, "trust_ratio");
  if (!(std::isfinite(epsilon) && epsilon > 0.0))
    throw ContractError("trust_ratio: epsilon must be finite and positive");
  if (!post.covariance_defined()) {
    std::ostringstream msg;
    msg << "trust_ratio: covariance undefined, (N_s - N_p) N_x - 2 = "
        << post.dims.sigma2_denominator() << " <= 0";
    throw CovarianceUndefinedError(msg.str());
  }

  const int n_x = post.dims.n_x;
  const double term =
      *post.sigma2_hat * post.h_factor.inverse_trace_product(moments.g_mat);
  TrustReport rep;
  rep.epsilon = epsilon;
  rep.ratio.resize(n_x);
  rep.ratio_centered.resize(n_x);
  rep.trustworthy.assign(static_cast<size_t>(n_x), false);
  const Eigen::VectorXd mean = post.c_hat.transpose() * moments.g_vec;
  const double inf = std::numeric_limits<double>::infinity();
  for (int x = 0; x < n_x; ++x) {
    const double denom = post.c_hat.col(x).dot(moments.g_mat * post.c_hat.col(x));
    rep.ratio[x] = denom > 0.0 ? term / denom : term == 0.0 ? 0.0 : inf;
    const double centered = denom - mean[x] * mean[x];
    rep.ratio_centered[x] = centered > 0.0 ? term / centered : term == 0.0 ? 0.0 : inf;
    rep.trustworthy[static_cast<size_t>(x)] = rep.ratio[x] < epsilon;
  }
  return rep;
}

int flatten_spacetime(int n_sites, int n_times, int site, int time) {
  if (n_sites < 1 || n_times < 1)
    throw ContractError("flatten_spacetime: grid dimensions must be positive");
  if (site < 0 || site >= n_sites || time < 0 || time >= n_times) {
    std::ostringstream msg;
    msg << "flatten_spacetime: (site " << site << ", time " << time
        << ") outside grid " << n_sites << " x " << n_times;
    throw ContractError(msg.str());
  }
  return site * n_times + time;
}

std::pair<int, int> unflatten_spacetime(int n_sites, int n_times, int index) {
  if (n_sites < 1 || n_times < 1)
    throw ContractError("unflatten_spacetime: grid dimensions must be positive");
  if (index < 0 || index >= n_sites * n_times) {
    std::ostringstream msg;
    msg << "unflatten_spacetime: index " << index << " outside grid " << n_sites
        << " x " << n_times;
    throw ContractError(msg.str());
  }
  return {index / n_times, index % n_times};
}

}  // namespace suruq

#include "suruq/basis.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace suruq {

namespace {

// Strict out-of-domain tolerance: 1e-12 relative to the interval scale.
double domain_tolerance(const Interval& iv) {
  return 1e-12 * std::max({iv.hi - iv.lo, std::abs(iv.lo), std::abs(iv.hi)});
}

double map_to_cube(const Interval& iv, double a) {
  return 2.0 * (a - iv.lo) / (iv.hi - iv.lo) - 1.0;
}

enum class OutOfDomain { error, clamp };

// Maps a to the reference cube, clamping slight excursions. Under
// OutOfDomain::error, coordinates beyond the strict tolerance throw.
Eigen::VectorXd to_reference_cube(const BasisSpec& spec, const Eigen::VectorXd& a,
                                  OutOfDomain policy, bool* clamped) {
  if (a.size() != spec.n_params()) {
    std::ostringstream msg;
    msg << "eval_basis: point has dimension " << a.size() << ", basis expects "
        << spec.n_params();
    throw ContractError(msg.str());
  }
  Eigen::VectorXd u(a.size());
  for (int k = 0; k < a.size(); ++k) {
    const Interval& iv = spec.domain[static_cast<size_t>(k)];
    const double tol = domain_tolerance(iv);
    if (a[k] < iv.lo - tol || a[k] > iv.hi + tol) {
      if (policy == OutOfDomain::error) {
        std::ostringstream msg;
        msg << "eval_basis: coordinate " << k << " = " << a[k] << " outside domain ["
            << iv.lo << ", " << iv.hi << "]";
        throw DomainViolationError(msg.str());
      }
      if (clamped != nullptr) *clamped = true;
    }
    const double x = std::clamp(a[k], iv.lo, iv.hi);
    u[k] = std::clamp(map_to_cube(iv, x), -1.0, 1.0);
  }
  return u;
}

Eigen::VectorXd eval_on_cube(const BasisSpec& spec, const Eigen::VectorXd& u) {
  const int n_a = spec.n_params();
  int max_degree = 0;
  for (const MultiIndex& idx : spec.indices)
    for (int e : idx) max_degree = std::max(max_degree, e);

  // Per-dimension Legendre tables, then products per multi-index.
  Eigen::MatrixXd table(n_a, max_degree + 1);
  std::vector<double> row(static_cast<size_t>(max_degree) + 1);
  for (int k = 0; k < n_a; ++k) {
    legendre_values(max_degree, u[k], row.data());
    for (int d = 0; d <= max_degree; ++d) table(k, d) = row[static_cast<size_t>(d)];
  }

  Eigen::VectorXd phi(spec.n_basis());
  for (int nu = 0; nu < spec.n_basis(); ++nu) {
    double p = 1.0;
    const MultiIndex& idx = spec.indices[static_cast<size_t>(nu)];
    for (int k = 0; k < n_a; ++k) p *= table(k, idx[static_cast<size_t>(k)]);
    phi[nu] = p;
  }
  return phi;
}

}  // namespace

void BasisSpec::validate() const {
  if (family != BasisFamily::legendre)
    throw ContractError("BasisSpec: unsupported basis family");
  if (indices.empty()) throw ContractError("BasisSpec: empty index set");
  if (domain.empty()) throw ContractError("BasisSpec: empty domain");
  for (size_t k = 0; k < domain.size(); ++k) {
    if (!(domain[k].lo < domain[k].hi)) {
      std::ostringstream msg;
      msg << "BasisSpec: domain interval " << k << " has lo >= hi (" << domain[k].lo
          << ", " << domain[k].hi << ")";
      throw ContractError(msg.str());
    }
  }
  const size_t n_a = domain.size();
  std::set<MultiIndex> seen;
  for (size_t nu = 0; nu < indices.size(); ++nu) {
    const MultiIndex& idx = indices[nu];
    if (idx.size() != n_a) {
      std::ostringstream msg;
      msg << "BasisSpec: index " << nu << " has length " << idx.size() << ", expected "
          << n_a;
      throw ContractError(msg.str());
    }
    for (int e : idx)
      if (e < 0) throw ContractError("BasisSpec: negative exponent in multi-index");
    if (!seen.insert(idx).second) {
      std::ostringstream msg;
      msg << "BasisSpec: duplicate multi-index at position " << nu;
      throw ContractError(msg.str());
    }
  }
  const bool first_constant =
      std::all_of(indices[0].begin(), indices[0].end(), [](int e) { return e == 0; });
  if (!first_constant)
    throw ContractError("BasisSpec: index 0 must be the constant (all-zero) multi-index");
}

std::vector<MultiIndex> total_degree_index_set(int n_params, int degree) {
  if (n_params < 1) throw ContractError("total_degree_index_set: n_params must be >= 1");
  if (degree < 0) throw ContractError("total_degree_index_set: degree must be >= 0");

  std::vector<MultiIndex> out;
  MultiIndex current(static_cast<size_t>(n_params), 0);
  // Fills positions [pos, n_params) with exponents summing to rest, leading
  // exponent descending, and appends each completed index.
  auto emit = [&](auto&& self, int pos, int rest) -> void {
    if (pos == n_params - 1) {
      current[static_cast<size_t>(pos)] = rest;
      out.push_back(current);
      return;
    }
    for (int e = rest; e >= 0; --e) {
      current[static_cast<size_t>(pos)] = e;
      self(self, pos + 1, rest - e);
    }
  };
  for (int grade = 0; grade <= degree; ++grade) emit(emit, 0, grade);
  return out;
}

BasisSpec make_total_degree_spec(int degree, std::vector<Interval> domain) {
  BasisSpec spec;
  spec.indices = total_degree_index_set(static_cast<int>(domain.size()), degree);
  spec.domain = std::move(domain);
  spec.validate();
  return spec;
}

double legendre(int degree, double x) {
  if (degree < 0) throw ContractError("legendre: negative degree");
  double prev = 1.0;
  if (degree == 0) return prev;
  double cur = x;
  for (int n = 1; n < degree; ++n) {
    const double next = ((2.0 * n + 1.0) * x * cur - n * prev) / (n + 1.0);
    prev = cur;
    cur = next;
  }
  return cur;
}

void legendre_values(int max_degree, double x, double* out) {
  out[0] = 1.0;
  if (max_degree == 0) return;
  out[1] = x;
  for (int n = 1; n < max_degree; ++n)
    out[n + 1] = ((2.0 * n + 1.0) * x * out[n] - n * out[n - 1]) / (n + 1.0);
}

Eigen::VectorXd eval_basis(const BasisSpec& spec, const Eigen::VectorXd& a) {
  return eval_on_cube(spec, to_reference_cube(spec, a, OutOfDomain::error, nullptr));
}

Eigen::VectorXd eval_basis_clamped(const BasisSpec& spec, const Eigen::VectorXd& a,
                                   bool* clamped) {
  return eval_on_cube(spec, to_reference_cube(spec, a, OutOfDomain::clamp, clamped));
}

DesignMatrix build_design_matrix(const BasisSpec& spec, const Eigen::MatrixXd& samples) {
  spec.validate();
  if (samples.rows() > 0 && samples.cols() != spec.n_params()) {
    std::ostringstream msg;
    msg << "build_design_matrix: samples have " << samples.cols()
        << " columns, basis expects " << spec.n_params();
    throw ContractError(msg.str());
  }
  DesignMatrix design;
  design.spec = spec;
  design.entries.resize(samples.rows(), spec.n_basis());
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    try {
      const Eigen::VectorXd u = to_reference_cube(spec, samples.row(i).transpose(),
                                                  OutOfDomain::error, nullptr);
      design.entries.row(i) = eval_on_cube(spec, u).transpose();
    } catch (const DomainViolationError& e) {
      std::ostringstream msg;
      msg << "row " << i << ": " << e.what();
      throw DomainViolationError(msg.str());
    }
  }
  return design;
}

}  // namespace suruq

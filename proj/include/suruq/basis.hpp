#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

#include "suruq/errors.hpp"

namespace suruq {

/// One exponent per input parameter; the degree of the per-dimension
/// Legendre factor in a tensor-product basis function.
using MultiIndex = std::vector<int>;

struct Interval {
  double lo = -1.0;
  double hi = 1.0;
};

enum class BasisFamily { legendre };

/// A multivariate polynomial basis: tensor products of Legendre polynomials
/// on a box, evaluated after the affine map of each coordinate to [-1,1].
struct BasisSpec {
  BasisFamily family = BasisFamily::legendre;
  std::vector<MultiIndex> indices;  // size N_p; entry 0 must be the all-zero index
  std::vector<Interval> domain;     // size N_a

  int n_params() const { return static_cast<int>(domain.size()); }
  int n_basis() const { return static_cast<int>(indices.size()); }

  /// Throws ContractError when an invariant is broken: duplicate indices,
  /// negative exponents, wrong index lengths, empty intervals, or a first
  /// index that is not the constant.
  void validate() const;
};

/// All multi-indices over n_params dimensions with total degree <= degree,
/// in graded lexicographic order (grade-major, leading exponent descending
/// within a grade). Count equals binomial(n_params + degree, degree).
std::vector<MultiIndex> total_degree_index_set(int n_params, int degree);

/// Convenience: total-degree spec on the given box.
BasisSpec make_total_degree_spec(int degree, std::vector<Interval> domain);

/// Legendre P_n(x) by the three-term recurrence. x is expected in [-1,1].
double legendre(int degree, double x);

/// P_0..P_max_degree at x, written into out (size max_degree + 1).
void legendre_values(int max_degree, double x, double* out);

/// Basis vector Phi(a), length N_p. Points up to 1e-12 relative outside the
/// domain are clamped; beyond that a DomainViolationError names the
/// offending coordinate.
Eigen::VectorXd eval_basis(const BasisSpec& spec, const Eigen::VectorXd& a);

/// Same evaluation but clamping any out-of-domain coordinate to the box.
/// Sets *clamped when a coordinate lay outside beyond the strict tolerance.
Eigen::VectorXd eval_basis_clamped(const BasisSpec& spec, const Eigen::VectorXd& a,
                                   bool* clamped);

struct DesignMatrix {
  Eigen::MatrixXd entries;  // N_s x N_p, entries(i, nu) = Phi_nu(a_i)
  BasisSpec spec;           // provenance

  int n_samples() const { return static_cast<int>(entries.rows()); }
  int n_basis() const { return static_cast<int>(entries.cols()); }
};

/// Row i is eval_basis(spec, samples.row(i)). Domain violations are
/// re-thrown with the row index attached.
DesignMatrix build_design_matrix(const BasisSpec& spec, const Eigen::MatrixXd& samples);

}  // namespace suruq

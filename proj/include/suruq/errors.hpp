#pragma once

#include <stdexcept>
#include <string>

namespace suruq {

/// Base class of every error thrown by this library.
class Error : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Caller broke an interface contract (dimension mismatch, bad argument).
class ContractError : public Error {
  using Error::Error;
};

/// Evaluation point lies outside the basis domain beyond tolerance.
class DomainViolationError : public Error {
  using Error::Error;
};

/// Fewer training samples than basis functions.
class UnderdeterminedError : public Error {
  using Error::Error;
};

/// Design matrix is rank deficient or too ill-conditioned to factor.
class SingularDesignError : public Error {
  using Error::Error;
};

/// Coefficient covariance requested where (N_s - N_p) * N_x <= 2.
class CovarianceUndefinedError : public Error {
  using Error::Error;
};

/// Evidence requested where N_sx <= N_bx.
class EvidenceUndefinedError : public Error {
  using Error::Error;
};

/// chi2_min underflowed: the surrogate interpolates the data exactly and
/// the noise-scale marginalization degenerates.
class InterpolationDegenerateError : public Error {
  using Error::Error;
};

/// Kernel matrix failed its Cholesky factorization.
class KernelSingularError : public Error {
  using Error::Error;
};

/// Too much input-posterior weight fell outside the basis domain.
class DomainCoverageError : public Error {
  using Error::Error;
};

/// Quadrature refinement did not converge to the requested tolerance.
class RefinementError : public Error {
  using Error::Error;
};

/// Every candidate in a multi-model or multi-kernel request failed.
class AggregateError : public Error {
  using Error::Error;
};

/// File could not be parsed; message carries path and line number.
class ParseError : public Error {
  using Error::Error;
};

}  // namespace suruq

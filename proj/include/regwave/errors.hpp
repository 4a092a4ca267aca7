#pragma once

#include <stdexcept>
#include <string>

namespace regwave {

// Invalid input parameters (parity, ranges, empty ensembles).
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Random construction failed (rejection budget, empty proposal pool).
struct SamplingError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A graph operation would break simplicity or regularity.
struct IntegrityError : std::logic_error {
  using std::logic_error::logic_error;
};

// Singular systems, non-convergence, quadrature failure.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of an operation.
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

// Collected data unusable for the requested statistic.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace regwave

#pragma once

#include <stdexcept>
#include <string>

namespace gbi {

/// Input outside the domain of an operation (negative horizon, p outside its family, ...).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Volatility matrix is singular or too badly conditioned to invert.
class RankError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// A modelling assumption is violated, e.g. a non-positive market price of risk.
class AssumptionViolation : public DomainError {
 public:
  using DomainError::DomainError;
};

/// Endowment does not cover the protected wealth floor.
class InfeasibleFloor : public DomainError {
 public:
  using DomainError::DomainError;
};

/// A hedge ratio was requested at maturity, where it is not defined.
class MaturityError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// A strategy produced a non-finite holding.
class StrategyFault : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical failure (non-convergent root find, diverging training loss).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace gbi

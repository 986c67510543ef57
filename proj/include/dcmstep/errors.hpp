#pragma once

#include <stdexcept>
#include <string>

namespace dcmstep {

/// Stage-1 constraint intersection is empty: no step timing satisfies all
/// gait bounds at the commanded velocity.
class InfeasibleCommand : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// QP equality rows are rank deficient (or mutually inconsistent duplicates).
class DegenerateProblem : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// The QP reported infeasible (or exceeded its iteration budget) where the
/// caller requires a solution.
class SolverFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Boundary-value problem too close to singular to solve reliably,
/// e.g. a swing replan horizon below the minimum.
class IllConditioned : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Polynomial evaluated outside its validity interval.
class OutOfDomain : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Scenario file rejected; message carries line/field diagnostics.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dcmstep

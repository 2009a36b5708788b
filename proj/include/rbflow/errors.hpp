#pragma once

#include <stdexcept>
#include <string>

namespace rbflow {

// A closed-form expression was asked for outside its validity window, or an
// exact flow reached its blow-up/extinction time. t_limit carries T'.
class FlowDomainError : public std::runtime_error {
 public:
  FlowDomainError(const std::string& msg, double t_limit)
      : std::runtime_error(msg), t_limit(t_limit) {}
  double t_limit;
};

// dt violates the explicit-step stability bound; thrown before stepping.
class CflError : public std::runtime_error {
 public:
  CflError(const std::string& msg, double dt_max) : std::runtime_error(msg), dt_max(dt_max) {}
  double dt_max;
};

// Eigensolver failed to certify a residual below tol_eig. Carries the best
// candidate so callers can report it; never silently accepted as a result.
class SolverError : public std::runtime_error {
 public:
  SolverError(const std::string& msg, double best_lambda, double best_residual)
      : std::runtime_error(msg), best_lambda(best_lambda), best_residual(best_residual) {}
  double best_lambda;
  double best_residual;
};

}  // namespace rbflow

#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Core>

namespace qmepi {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: schema problems or broken type invariants.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Input has the wrong number of subensembles or states for the operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// An operation was called outside its precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// The minimax search did not certify a minimizer. Carries the best iterate.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double best_s, const Eigen::Vector3d& best_v)
      : Error(what), best_s_(best_s), best_v_(best_v) {}
  double best_s() const { return best_s_; }
  const Eigen::Vector3d& best_v() const { return best_v_; }

 private:
  double best_s_;
  Eigen::Vector3d best_v_;
};

/// No nonnegative convex coefficients express v over the requested face.
class InfeasibleFaceError : public Error {
 public:
  using Error::Error;
};

/// v coincides with a weighted point of the face, so directions are undefined.
class DegenerateFaceError : public Error {
 public:
  using Error::Error;
};

/// Closed forms and the numeric path disagree. Always a bug signal.
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

}  // namespace qmepi

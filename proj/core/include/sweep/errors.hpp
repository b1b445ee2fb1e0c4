#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace sweep {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// ---- expressions -----------------------------------------------------------

class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t position, std::vector<std::string> expected, const std::string& what);
  std::size_t position() const { return position_; }
  const std::vector<std::string>& expected() const { return expected_; }

 private:
  std::size_t position_;
  std::vector<std::string> expected_;
};

class UnknownIdentifier : public Error {
 public:
  explicit UnknownIdentifier(std::string name)
      : Error("unknown identifier '" + name + "'"), name_(std::move(name)) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

class IndexOutOfRange : public Error {
 public:
  explicit IndexOutOfRange(std::string name)
      : Error("variable index out of range: '" + name + "'"), name_(std::move(name)) {}
  const std::string& name() const { return name_; }

 private:
  std::string name_;
};

class DomainError : public Error {
 public:
  DomainError(const std::string& reason, std::string subexpression)
      : Error(reason + " in '" + subexpression + "'"), subexpression_(std::move(subexpression)) {}
  const std::string& subexpression() const { return subexpression_; }

 private:
  std::string subexpression_;
};

/// A field violates a structural requirement (e.g. max2 inside a constraint).
class InvalidField : public Error {
 public:
  using Error::Error;
};

// ---- geometry --------------------------------------------------------------

class NoBoundarySamples : public Error {
 public:
  NoBoundarySamples() : Error("no boundary samples with a nonempty active set") {}
};

class EmptyActiveSet : public Error {
 public:
  EmptyActiveSet() : Error("active set is empty at the query point") {}
};

class NotOnBoundary : public Error {
 public:
  NotOnBoundary() : Error("point is not on the boundary of the sweeping set") {}
};

class DegenerateCone : public Error {
 public:
  using Error::Error;
};

class NoConvergence : public Error {
 public:
  explicit NoConvergence(int max_iters)
      : Error("projection did not converge in " + std::to_string(max_iters) + " iterations"),
        max_iters_(max_iters) {}
  int max_iters() const { return max_iters_; }

 private:
  int max_iters_;
};

class InvalidSchedule : public Error {
 public:
  using Error::Error;
};

// ---- dynamics --------------------------------------------------------------

class StepFailure : public Error {
 public:
  explicit StepFailure(double t)
      : Error("integrator step size underflow at t=" + std::to_string(t)), t_(t) {}
  double t() const { return t_; }

 private:
  double t_;
};

class InvarianceViolation : public Error {
 public:
  InvarianceViolation(double t, double value)
      : Error("smoothed constraint left its invariant level at t=" + std::to_string(t) +
              " (value " + std::to_string(value) + ")"),
        t_(t), value_(value) {}
  double t() const { return t_; }
  double value() const { return value_; }

 private:
  double t_;
  double value_;
};

class ProjectionFailure : public Error {
 public:
  explicit ProjectionFailure(double t)
      : Error("projection onto the sweeping set failed at t=" + std::to_string(t)), t_(t) {}
  double t() const { return t_; }

 private:
  double t_;
};

class GridMismatch : public Error {
 public:
  GridMismatch() : Error("paths are sampled on different grids") {}
};

// ---- solver ----------------------------------------------------------------

class LineSearchStall : public Error {
 public:
  LineSearchStall(double gamma, int iter)
      : Error("line search stalled at gamma=" + std::to_string(gamma) + ", iteration " +
              std::to_string(iter)),
        gamma_(gamma), iter_(iter) {}
  double gamma() const { return gamma_; }
  int iter() const { return iter_; }

 private:
  double gamma_;
  int iter_;
};

class TerminalInfeasible : public Error {
 public:
  explicit TerminalInfeasible(double residual)
      : Error("terminal constraint infeasible, residual " + std::to_string(residual)),
        residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

class DegenerateNormalization : public Error {
 public:
  DegenerateNormalization() : Error("||p(T)|| + lambda vanishes; certificate is trivial") {}
};

class UnsupportedSetDescriptor : public Error {
 public:
  using Error::Error;
};

}  // namespace sweep

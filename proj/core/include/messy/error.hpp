#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace messy {

/// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An expression produced a non-finite value.
class EvaluationError : public Error {
 public:
  using Error::Error;
};

/// Random expression generation ran out of draws.
class ExhaustionError : public Error {
 public:
  using Error::Error;
};

/// Gram-Schmidt found a basis function whose gradient is (numerically) in
/// the span of the preceding ones.
class LinearDependenceError : public Error {
 public:
  LinearDependenceError(std::size_t index, const std::string& what)
      : Error(what), index_(index) {}
  std::size_t index() const noexcept { return index_; }

 private:
  std::size_t index_;
};

class SingularHessianError : public Error {
 public:
  SingularHessianError(double cond, const std::string& what)
      : Error(what), cond_(cond) {}
  double cond() const noexcept { return cond_; }

 private:
  double cond_;
};

/// exp(lambda . H) does not have a finite integral over the support.
class NonIntegrableError : public Error {
 public:
  using Error::Error;
};

/// Adaptive quadrature ran out of its evaluation budget.
class QuadratureError : public Error {
 public:
  using Error::Error;
};

class DegenerateDataError : public Error {
 public:
  using Error::Error;
};

class MultilevelError : public Error {
 public:
  using Error::Error;
};

/// Newton iteration stopped before reaching the gradient tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(double gradient_norm, const std::string& what)
      : Error(what), gradient_norm_(gradient_norm) {}
  double gradient_norm() const noexcept { return gradient_norm_; }

 private:
  double gradient_norm_;
};

/// Importance weights collapsed onto too few samples.
class DegeneracyError : public Error {
 public:
  DegeneracyError(double ess, const std::string& what) : Error(what), ess_(ess) {}
  double ess() const noexcept { return ess_; }

 private:
  double ess_;
};

class SearchExhaustedError : public Error {
 public:
  using Error::Error;
};

class MessyFailure : public Error {
 public:
  using Error::Error;
};

class KdeFailure : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what) : Error(what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace messy

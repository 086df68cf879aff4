#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace trf {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The black-box map failed or produced a non-finite value. Carries the input.
class BlackBoxFault : public Error {
 public:
  BlackBoxFault(const std::string& what, Vector input)
      : Error(what), input_(std::move(input)) {}
  const Vector& input() const { return input_; }

 private:
  Vector input_;
};

/// A sample design could not be fitted (singular or badly conditioned).
class IllPoisedDesign : public Error {
 public:
  IllPoisedDesign(const std::string& what, double condition)
      : Error(what), condition_(condition) {}
  double condition() const { return condition_; }

 private:
  double condition_;
};

class SpectralFault : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class SubsolverFault : public Error {
 public:
  using Error::Error;
};

}  // namespace trf

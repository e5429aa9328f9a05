#pragma once

#include <stdexcept>
#include <string>

namespace marginlab {

// Bad dimensions, ranges, or modes in caller-supplied parameters.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A matrix required to be full rank (or SPD) is numerically singular.
class SingularMatrixError : public std::runtime_error {
 public:
  SingularMatrixError(const std::string& what, double sigma_min)
      : std::runtime_error(what), sigma_min(sigma_min) {}
  double sigma_min;
};

}  // namespace marginlab

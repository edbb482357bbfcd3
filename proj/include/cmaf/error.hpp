#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cmaf {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NonFiniteError : public Error {
 public:
  NonFiniteError(const std::string& what, std::size_t index)
      : Error(what + ": non-finite value at grid index " + std::to_string(index)), index_(index) {}
  std::size_t index() const { return index_; }

 private:
  std::size_t index_;
};

// The metric g + Hess(phi) is not positive definite at some grid point.
class ConeExitError : public Error {
 public:
  ConeExitError(std::size_t point, double eigenvalue)
      : Error("metric not positive definite: min eigenvalue " + std::to_string(eigenvalue) +
              " at grid index " + std::to_string(point)),
        point_(point),
        eigenvalue_(eigenvalue) {}
  std::size_t point() const { return point_; }
  double eigenvalue() const { return eigenvalue_; }

 private:
  std::size_t point_;
  double eigenvalue_;
};

}  // namespace cmaf

// types.hpp -- scalar and dense-matrix aliases shared across the library.

#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace fastfca {

using Complex = std::complex<double>;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using RMat = Eigen::MatrixXd;
using RVec = Eigen::VectorXd;

// Unrecoverable numerical condition (singular reduction, non-finite update).
// The CLI maps this to exit code 1, as opposed to usage errors (exit code 2).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fastfca

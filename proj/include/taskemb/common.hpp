#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace taskemb {

using Scalar = double;

/// Row-major dense matrix; the storage order of every Tensor buffer.
using RowMatrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Malformed input files, checkpoints and records.
class DataError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// NaN/Inf values or a diverging loss.
class NumericError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

}  // namespace taskemb

#pragma once

#include <vector>

#include "dkstn/tensor.hpp"

namespace dkstn::linalg {

/// Solves S x = b for symmetric positive-definite S via Cholesky.
std::vector<double> cholesky_solve(const Tensor& spd, const std::vector<double>& rhs);

struct SymmetricEigen {
  std::vector<double> values;  // descending
  Tensor vectors;              // [n, n], column j pairs with values[j]
};

/// Cyclic Jacobi rotations; converges to machine precision for the small
/// dense covariance matrices used here.
SymmetricEigen symmetric_eigen(const Tensor& symmetric, double tolerance = 1e-14,
                               int max_sweeps = 100);

}  // namespace dkstn::linalg

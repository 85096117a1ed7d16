#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace toporeg {

/// Dense float64 matrix used for every numerical quantity in the library.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Hard cluster assignment, one entry per node.
using Labels = std::vector<int>;

}  // namespace toporeg

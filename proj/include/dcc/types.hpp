#pragma once

#include <Eigen/Dense>

namespace dcc {

using Scalar = double;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

} // namespace dcc

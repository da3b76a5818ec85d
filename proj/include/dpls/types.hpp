#pragma once

#include <Eigen/Dense>

namespace dpls {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

} // namespace dpls

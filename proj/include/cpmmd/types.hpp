#pragma once

#include <Eigen/Dense>

namespace cpmmd {

/// Sample matrices hold one point per row.
using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

}  // namespace cpmmd

#pragma once

#include <Eigen/Dense>

namespace dadao {

// Matrix exponential by scaling and squaring with a diagonal Pade
// approximant of degree 3, 5, 7, 9 or 13 chosen from the 1-norm
// (Higham 2005 thresholds).
Eigen::MatrixXd expm(const Eigen::MatrixXd& a);

}  // namespace dadao

#pragma once
#include <Eigen/Dense>

namespace dft {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

// batches are row-major by convention: one sample per row

}  // namespace dft

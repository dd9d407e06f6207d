#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace fmbs {

using Index = Eigen::Index;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;
using IndexVec = Eigen::Matrix<Index, Eigen::Dynamic, 1>;

}  // namespace fmbs

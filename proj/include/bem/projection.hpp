#pragma once

#include <Eigen/Core>
#include <vector>

namespace bem {

struct PcaResult {
  Eigen::RowVectorXd mean;
  Eigen::MatrixXd components;  // [k, d], orthonormal rows, by decreasing variance
  Eigen::MatrixXd coords;      // [n, k]
  std::vector<double> explained_variance;
};

// Principal components of the rows of `data` via the covariance
// eigendecomposition. Component signs are fixed so the largest-magnitude
// entry is positive.
PcaResult pca(const Eigen::MatrixXd& data, int n_components);

Eigen::MatrixXd pca_reconstruct(const PcaResult& p);

}  // namespace bem

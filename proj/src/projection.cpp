#include "bem/projection.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>

#include "bem/common.hpp"

namespace bem {

PcaResult pca(const Eigen::MatrixXd& data, int n_components) {
  if (data.rows() < 1 || data.cols() < 1) throw Error(ErrorKind::validation, "pca: empty input");
  if (n_components < 1 || n_components > data.cols()) {
    throw Error(ErrorKind::config, "pca: n_components must lie in [1, d]");
  }
  PcaResult r;
  r.mean = data.colwise().mean();
  const Eigen::MatrixXd centered = data.rowwise() - r.mean;
  const double denom = data.rows() > 1 ? static_cast<double>(data.rows() - 1) : 1.0;
  const Eigen::MatrixXd cov = centered.transpose() * centered / denom;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw Error(ErrorKind::numeric, "pca: eigendecomposition failed");
  const Eigen::Index d = data.cols();
  r.components.resize(n_components, d);
  // Eigenvalues ascend; take from the end.
  for (int k = 0; k < n_components; ++k) {
    Eigen::RowVectorXd v = eig.eigenvectors().col(d - 1 - k).transpose();
    Eigen::Index arg = 0;
    v.cwiseAbs().maxCoeff(&arg);
    if (v(arg) < 0) v = -v;
    r.components.row(k) = v;
    r.explained_variance.push_back(std::max(0.0, eig.eigenvalues()(d - 1 - k)));
  }
  r.coords = centered * r.components.transpose();
  return r;
}

Eigen::MatrixXd pca_reconstruct(const PcaResult& p) {
  return (p.coords * p.components).rowwise() + p.mean;
}

}  // namespace bem

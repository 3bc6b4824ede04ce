#include "relkal/observability.hpp"

#include <Eigen/SVD>
#include <stdexcept>

namespace relkal {

Eigen::MatrixXd observability_matrix(const Eigen::MatrixXd& A, const Eigen::MatrixXd& H, int n_blocks) {
  if (n_blocks < 1) throw ConfigError("observability_matrix: n_blocks must be >= 1");
  if (A.rows() != A.cols() || H.cols() != A.rows()) {
    throw ConfigError("observability_matrix: dimension mismatch");
  }
  const Eigen::Index k = H.rows();
  Eigen::MatrixXd q(k * n_blocks, A.cols());
  Eigen::MatrixXd block = H;
  for (int i = 0; i < n_blocks; ++i) {
    q.middleRows(i * k, k) = block;
    block = block * A;
  }
  return q;
}

Eigen::MatrixXd stochastic_gramian_matrix(const Eigen::MatrixXd& A, const Eigen::MatrixXd& H,
                                          const Eigen::MatrixXd& W, int n_blocks) {
  const Eigen::MatrixXd q = observability_matrix(A, H, n_blocks);
  Eigen::LLT<Eigen::MatrixXd> llt(W);
  if (llt.info() != Eigen::Success) {
    throw std::runtime_error("stochastic_gramian: measurement covariance is not positive definite");
  }
  // Whiten each block: L^{-1} (H A^i), then G = sum (.)^T (.)
  const Eigen::Index k = H.rows();
  Eigen::MatrixXd whitened(q.rows(), q.cols());
  for (int i = 0; i < n_blocks; ++i) {
    whitened.middleRows(i * k, k) = llt.matrixL().solve(q.middleRows(i * k, k));
  }
  Eigen::MatrixXd g = whitened.transpose() * whitened;
  return 0.5 * (g + g.transpose());
}

GramianReport gramian_report(const Eigen::MatrixXd& gramian, int n_blocks, double det_tol) {
  GramianReport r;
  r.n_blocks = n_blocks;
  r.det = std::max(gramian.determinant(), 0.0);
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(gramian);
  r.min_singular_value = svd.singularValues().minCoeff();
  r.observable = r.det > det_tol;
  return r;
}

GramianReport stochastic_gramian(Model model, const RelState& rel, const EgoInput& ego_in, double dt,
                                 const Mat2& W, int n_blocks) {
  const DiscreteJacobians j = discrete_jacobians(RelState{model, rel.data}, ego_in, dt);
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(2, 6);
  H(0, 0) = 1.0;
  H(1, 1) = 1.0;
  return gramian_report(stochastic_gramian_matrix(j.A, H, W, n_blocks), n_blocks);
}

}  // namespace relkal

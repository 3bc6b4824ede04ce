#pragma once

#include "relkal/relmodels.hpp"
#include "relkal/statespace.hpp"

namespace relkal {

/// Determinant threshold separating observable from ill-observable operating points.
inline constexpr double kGramianDetTol = 1e-18;
inline constexpr int kDefaultGramianBlocks = 6;

struct GramianReport {
  double det = 0.0;
  double min_singular_value = 0.0;
  int n_blocks = kDefaultGramianBlocks;
  bool observable = false;
};

/// Stacked (H; H A; H A^2; ...; H A^{n_blocks-1}).
Eigen::MatrixXd observability_matrix(const Eigen::MatrixXd& A, const Eigen::MatrixXd& H, int n_blocks);

/// Q^T diag(W, ..., W)^{-1} Q for an arbitrary linear pair.
Eigen::MatrixXd stochastic_gramian_matrix(const Eigen::MatrixXd& A, const Eigen::MatrixXd& H,
                                          const Eigen::MatrixXd& W, int n_blocks);

GramianReport gramian_report(const Eigen::MatrixXd& gramian, int n_blocks, double det_tol = kGramianDetTol);

/// Gramian of the relative model linearised at (rel, ego_in) for relative position
/// measurements with covariance W.
GramianReport stochastic_gramian(Model model, const RelState& rel, const EgoInput& ego_in, double dt,
                                 const Mat2& W = Mat2::Identity(), int n_blocks = kDefaultGramianBlocks);

}  // namespace relkal

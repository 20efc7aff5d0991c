#pragma once

#include <Eigen/Core>

namespace dnet {

// The first k eigenpairs of L phi = lambda M phi, eigenvalues ascending and
// eigenvectors M-orthonormal (phi_i^T M phi_j = delta_ij).
struct EigenBasis {
  Eigen::VectorXd eigenvalues;  // k
  Eigen::MatrixXd eigenvectors; // V x k
  int k = 0;
};

} // namespace dnet

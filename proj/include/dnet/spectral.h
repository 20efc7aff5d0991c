#pragma once

#include "dnet/eigen_basis.h"
#include "dnet/operators.h"

#include <Eigen/Core>

namespace dnet {

// Smallest-eigenvalue pairs via shift-invert Lanczos with full
// reorthogonalization (shift sigma = -1e-8, inner solves by sparse LDLT of
// L - sigma M). Falls back to a dense solve of the symmetrized problem for
// V <= 512, which also serves as the test oracle. Residuals are verified to
// ||L phi - lambda M phi|| <= 1e-7 ||M phi||; non-convergence is an error.
EigenBasis solve_eigenbasis(const SparseReal& L, const Eigen::VectorXd& mass, int k);

// Dense-path solver, exposed for oracle use in tests. Requires V <= 512.
EigenBasis solve_eigenbasis_dense(const SparseReal& L, const Eigen::VectorXd& mass, int k);

// One implicit Euler step per channel: solves (M + t_c L) x = M u_c.
// t = 0 returns the input unchanged. Columns sharing a t value share the
// factorization within one call.
Eigen::MatrixXd diffuse_implicit(const Eigen::MatrixXd& u, const Eigen::VectorXd& t,
                                 const SparseReal& L, const Eigen::VectorXd& mass);

// Spectral diffusion: per channel, project (Phi^T M u), scale coefficients by
// exp(-lambda_i t), and reconstruct. At t = 0 this is the M-orthogonal
// projection onto the basis span, not the identity.
Eigen::MatrixXd diffuse_spectral(const Eigen::MatrixXd& u, const Eigen::VectorXd& t,
                                 const EigenBasis& basis, const Eigen::VectorXd& mass);

// Dense heat operator expm(-t M^{-1} L) via full eigendecomposition of the
// symmetrized problem. Test oracle; requires V <= 512.
Eigen::MatrixXd dense_heat_oracle(const SparseReal& L, const Eigen::VectorXd& mass, double t);

// 16 diffusion times logarithmically spaced on [0.01, 1].
Eigen::VectorXd hks_default_times();

// Heat kernel signature hks(v, t) = sum_i exp(-lambda_i t) phi_i(v)^2,
// truncated to the basis. One column per time value.
Eigen::MatrixXd compute_hks(const EigenBasis& basis, const Eigen::VectorXd& times);

} // namespace dnet

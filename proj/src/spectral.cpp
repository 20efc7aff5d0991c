#include "dnet/spectral.h"

#include "dnet/rng.h"

#include <Eigen/Dense>
#include <Eigen/SparseCholesky>
#include <algorithm>
#include <cmath>
#include <map>
#include <vector>

namespace dnet {

namespace {

constexpr double kShift = -1e-8;
constexpr double kResidualTol = 1e-7;
constexpr int kDenseCutoff = 512;

void check_inputs(const SparseReal& L, const Eigen::VectorXd& mass, int k) {
  const int V = static_cast<int>(L.rows());
  if (L.cols() != V) throw Error("eigenbasis: L must be square");
  if (mass.size() != V) throw Error("eigenbasis: mass size mismatch");
  if (mass.minCoeff() <= 0.0) throw Error("eigenbasis: mass must be strictly positive");
  if (k < 1) throw Error("eigenbasis: k must be >= 1");
}

double eigen_residual(const SparseReal& L, const Eigen::VectorXd& mass, double lambda,
                      const Eigen::VectorXd& phi) {
  Eigen::VectorXd m_phi = mass.asDiagonal() * phi;
  return (L * phi - lambda * m_phi).norm() / std::max(m_phi.norm(), 1e-300);
}

} // namespace

EigenBasis solve_eigenbasis_dense(const SparseReal& L, const Eigen::VectorXd& mass, int k) {
  check_inputs(L, mass, k);
  const int V = static_cast<int>(L.rows());
  if (V > kDenseCutoff) throw Error("dense eigensolver limited to V <= 512");
  if (k > V) throw Error("eigenbasis: k exceeds the number of vertices");

  // Symmetrize with M^{-1/2}: B = M^{-1/2} L M^{-1/2}, phi = M^{-1/2} psi.
  Eigen::VectorXd inv_sqrt_m = mass.cwiseSqrt().cwiseInverse();
  Eigen::MatrixXd B = Eigen::MatrixXd(L);
  B = inv_sqrt_m.asDiagonal() * B * inv_sqrt_m.asDiagonal();
  B = 0.5 * (B + B.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(B);
  if (es.info() != Eigen::Success) throw Error("dense eigensolver failed");

  EigenBasis basis;
  basis.k = k;
  basis.eigenvalues = es.eigenvalues().head(k);
  basis.eigenvectors = inv_sqrt_m.asDiagonal() * es.eigenvectors().leftCols(k);
  return basis;
}

namespace {

EigenBasis solve_eigenbasis_lanczos(const SparseReal& L, const Eigen::VectorXd& mass, int k) {
  const int V = static_cast<int>(L.rows());
  if (k >= V) throw Error("eigenbasis: k must be smaller than the number of vertices");

  SparseReal A = L;
  for (int i = 0; i < V; i++) A.coeffRef(i, i) -= kShift * mass[i];
  A.makeCompressed();
  Eigen::SimplicialLDLT<SparseReal> solver(A);
  if (solver.info() != Eigen::Success)
    throw Error("eigenbasis: factorization of the shifted operator failed");

  double worst_residual = 0.0;
  int m_target = std::min(V, std::max(2 * k + 32, k + 64));
  for (int attempt = 0; attempt < 3; attempt++) {
    const int m_max = m_target;
    Eigen::MatrixXd Q(V, m_max);
    Eigen::VectorXd alpha = Eigen::VectorXd::Zero(m_max);
    Eigen::VectorXd beta = Eigen::VectorXd::Zero(m_max);

    Rng rng(0x5eed0000u + static_cast<uint64_t>(attempt));
    Eigen::VectorXd v(V);
    for (int i = 0; i < V; i++) v[i] = rng.uniform(-1.0, 1.0);
    v /= std::sqrt(v.dot(mass.cwiseProduct(v)));

    int m = m_max;
    for (int j = 0; j < m_max; j++) {
      Q.col(j) = v;
      Eigen::VectorXd w = solver.solve(mass.cwiseProduct(v));
      if (j > 0) w -= beta[j - 1] * Q.col(j - 1);
      alpha[j] = w.dot(mass.cwiseProduct(v));
      w -= alpha[j] * Q.col(j);

      // full reorthogonalization in the M inner product, two passes
      for (int pass = 0; pass < 2; pass++) {
        Eigen::VectorXd h = Q.leftCols(j + 1).transpose() * mass.cwiseProduct(w);
        w -= Q.leftCols(j + 1) * h;
      }

      double b = std::sqrt(std::max(w.dot(mass.cwiseProduct(w)), 0.0));
      if (j + 1 == m_max) break;
      if (b < 1e-14) {
        // invariant subspace exhausted: restart with a fresh random direction
        Eigen::VectorXd r(V);
        for (int i = 0; i < V; i++) r[i] = rng.uniform(-1.0, 1.0);
        for (int pass = 0; pass < 2; pass++) {
          Eigen::VectorXd h = Q.leftCols(j + 1).transpose() * mass.cwiseProduct(r);
          r -= Q.leftCols(j + 1) * h;
        }
        double rn = std::sqrt(std::max(r.dot(mass.cwiseProduct(r)), 0.0));
        if (rn < 1e-14) {
          m = j + 1;
          break;
        }
        beta[j] = 0.0;
        v = r / rn;
      } else {
        beta[j] = b;
        v = w / b;
      }
    }

    if (m < k) {
      m_target = std::min(V, m_target + std::max(64, m_target / 2));
      continue;
    }

    Eigen::MatrixXd T = Eigen::MatrixXd::Zero(m, m);
    for (int j = 0; j < m; j++) {
      T(j, j) = alpha[j];
      if (j + 1 < m) {
        T(j, j + 1) = beta[j];
        T(j + 1, j) = beta[j];
      }
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(T);
    if (es.info() != Eigen::Success) throw Error("eigenbasis: tridiagonal solve failed");

    // theta ascending; largest theta correspond to eigenvalues nearest the
    // shift, i.e. the smallest lambda = sigma + 1/theta.
    EigenBasis basis;
    basis.k = k;
    basis.eigenvalues.resize(k);
    basis.eigenvectors.resize(V, k);
    for (int i = 0; i < k; i++) {
      double theta = es.eigenvalues()[m - 1 - i];
      if (theta == 0.0) throw Error("eigenbasis: zero Ritz value in shift-invert spectrum");
      basis.eigenvalues[i] = kShift + 1.0 / theta;
      basis.eigenvectors.col(i) = Q.leftCols(m) * es.eigenvectors().col(m - 1 - i);
    }

    // M-normalize and check residuals
    bool converged = true;
    worst_residual = 0.0;
    for (int i = 0; i < k; i++) {
      Eigen::VectorXd phi = basis.eigenvectors.col(i);
      double nrm = std::sqrt(phi.dot(mass.cwiseProduct(phi)));
      basis.eigenvectors.col(i) = phi / nrm;
      double res =
          eigen_residual(L, mass, basis.eigenvalues[i], basis.eigenvectors.col(i));
      worst_residual = std::max(worst_residual, res);
      if (res > kResidualTol) converged = false;
    }

    if (converged) {
      // ascending eigenvalue order (stable: theta descending maps to
      // lambda ascending already, but ties can permute)
      std::vector<int> order(static_cast<size_t>(k));
      for (int i = 0; i < k; i++) order[static_cast<size_t>(i)] = i;
      std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        return basis.eigenvalues[a] < basis.eigenvalues[b];
      });
      EigenBasis sorted;
      sorted.k = k;
      sorted.eigenvalues.resize(k);
      sorted.eigenvectors.resize(V, k);
      for (int i = 0; i < k; i++) {
        sorted.eigenvalues[i] = basis.eigenvalues[order[static_cast<size_t>(i)]];
        sorted.eigenvectors.col(i) = basis.eigenvectors.col(order[static_cast<size_t>(i)]);
      }
      return sorted;
    }
    m_target = std::min(V, m_target + std::max(64, m_target / 2));
  }
  throw Error("eigenbasis: Lanczos did not converge (worst residual " +
              std::to_string(worst_residual) + ")");
}

} // namespace

EigenBasis solve_eigenbasis(const SparseReal& L, const Eigen::VectorXd& mass, int k) {
  check_inputs(L, mass, k);
  const int V = static_cast<int>(L.rows());
  if (V <= kDenseCutoff) {
    if (k > V) throw Error("eigenbasis: k exceeds the number of vertices");
    return solve_eigenbasis_dense(L, mass, k);
  }
  return solve_eigenbasis_lanczos(L, mass, k);
}

Eigen::MatrixXd diffuse_implicit(const Eigen::MatrixXd& u, const Eigen::VectorXd& t,
                                 const SparseReal& L, const Eigen::VectorXd& mass) {
  const int V = static_cast<int>(u.rows());
  const int C = static_cast<int>(u.cols());
  if (t.size() != C) throw Error("diffuse_implicit: one time per channel required");
  if (L.rows() != V || mass.size() != V) throw Error("diffuse_implicit: dimension mismatch");
  for (int c = 0; c < C; c++)
    if (!(t[c] >= 0) || !std::isfinite(t[c]))
      throw Error("diffuse_implicit: diffusion times must be finite and non-negative");

  Eigen::MatrixXd out(V, C);

  // group channels by identical t; one factorization per distinct value
  std::map<double, std::vector<int>> groups;
  for (int c = 0; c < C; c++) groups[t[c]].push_back(c);

  for (const auto& [tc, cols] : groups) {
    if (tc == 0.0) {
      for (int c : cols) out.col(c) = u.col(c);
      continue;
    }
    SparseReal Aop = tc * L;
    for (int i = 0; i < V; i++) Aop.coeffRef(i, i) += mass[i];
    Aop.makeCompressed();
    Eigen::SimplicialLDLT<SparseReal> solver(Aop);
    if (solver.info() != Eigen::Success)
      throw Error("diffuse_implicit: factorization failed (operator not SPD?)");
    for (int c : cols) {
      Eigen::VectorXd rhs = mass.cwiseProduct(u.col(c));
      Eigen::VectorXd x = solver.solve(rhs);
      // iterative refinement until the relative residual is <= 1e-10
      for (int it = 0; it < 3; it++) {
        Eigen::VectorXd r = rhs - Aop * x;
        if (r.norm() <= 1e-10 * std::max(rhs.norm(), 1e-300)) break;
        x += solver.solve(r);
      }
      Eigen::VectorXd r = rhs - Aop * x;
      if (r.norm() > 1e-8 * std::max(rhs.norm(), 1e-300))
        throw Error("diffuse_implicit: solver residual above tolerance");
      out.col(c) = x;
    }
  }
  return out;
}

Eigen::MatrixXd diffuse_spectral(const Eigen::MatrixXd& u, const Eigen::VectorXd& t,
                                 const EigenBasis& basis, const Eigen::VectorXd& mass) {
  const int C = static_cast<int>(u.cols());
  if (t.size() != C) throw Error("diffuse_spectral: one time per channel required");
  if (u.rows() != basis.eigenvectors.rows() || u.rows() != mass.size())
    throw Error("diffuse_spectral: dimension mismatch");
  for (int c = 0; c < C; c++)
    if (!(t[c] >= 0) || !std::isfinite(t[c]))
      throw Error("diffuse_spectral: diffusion times must be finite and non-negative");

  Eigen::MatrixXd coeff = basis.eigenvectors.transpose() * (mass.asDiagonal() * u); // k x C
  for (int c = 0; c < C; c++)
    coeff.col(c).array() *= (-basis.eigenvalues.array() * t[c]).exp();
  return basis.eigenvectors * coeff;
}

Eigen::MatrixXd dense_heat_oracle(const SparseReal& L, const Eigen::VectorXd& mass, double t) {
  const int V = static_cast<int>(L.rows());
  if (V > kDenseCutoff) throw Error("dense_heat_oracle limited to V <= 512");
  if (t < 0) throw Error("dense_heat_oracle: negative time");

  Eigen::VectorXd sqrt_m = mass.cwiseSqrt();
  Eigen::VectorXd inv_sqrt_m = sqrt_m.cwiseInverse();
  Eigen::MatrixXd B = Eigen::MatrixXd(L);
  B = inv_sqrt_m.asDiagonal() * B * inv_sqrt_m.asDiagonal();
  B = 0.5 * (B + B.transpose()).eval();

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(B);
  if (es.info() != Eigen::Success) throw Error("dense_heat_oracle: eigendecomposition failed");

  Eigen::VectorXd decay = (-t * es.eigenvalues().array()).exp();
  // expm(-t M^{-1} L) = M^{-1/2} Q e^{-t Lambda} Q^T M^{1/2}
  return inv_sqrt_m.asDiagonal() * (es.eigenvectors() * decay.asDiagonal() *
                                    es.eigenvectors().transpose()) *
         sqrt_m.asDiagonal();
}

Eigen::VectorXd hks_default_times() {
  Eigen::VectorXd times(16);
  const double lo = std::log(0.01), hi = std::log(1.0);
  for (int i = 0; i < 16; i++) times[i] = std::exp(lo + (hi - lo) * i / 15.0);
  return times;
}

Eigen::MatrixXd compute_hks(const EigenBasis& basis, const Eigen::VectorXd& times) {
  for (int i = 0; i < times.size(); i++)
    if (times[i] <= 0) throw Error("compute_hks: times must be positive");
  const int V = static_cast<int>(basis.eigenvectors.rows());
  Eigen::MatrixXd phi2 = basis.eigenvectors.cwiseAbs2(); // V x k
  Eigen::MatrixXd out(V, times.size());
  for (int j = 0; j < times.size(); j++) {
    Eigen::VectorXd w = (-basis.eigenvalues.array() * times[j]).exp();
    out.col(j) = phi2 * w;
  }
  return out;
}

} // namespace dnet

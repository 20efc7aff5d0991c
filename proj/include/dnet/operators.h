#pragma once

#include "dnet/eigen_basis.h"
#include "dnet/shape.h"

#include <Eigen/SparseCore>
#include <complex>
#include <cstdint>
#include <string>
#include <utility>

namespace dnet {

using SparseReal = Eigen::SparseMatrix<double>;
using SparseComplex = Eigen::SparseMatrix<std::complex<double>>;

// Per-vertex orthonormal frame {e1, e2, n}; for oriented shapes e1 x e2 = n.
struct TangentFrames {
  Eigen::MatrixXd normals; // V x 3
  Eigen::MatrixXd e1;      // V x 3
  Eigen::MatrixXd e2;      // V x 3
};

// Counters for the robustness fallbacks engaged during assembly.
struct OperatorBuildReport {
  int degenerate_faces = 0;   // skipped (area below threshold)
  int clamped_cotans = 0;     // |cot| capped at the clamp value
  int isolated_vertices = 0;  // zero incident area, given epsilon mass
  int fallback_points = 0;    // degenerate neighborhoods, uniform weights
  int regularized_rows = 0;   // rank-deficient gradient fits (Tikhonov)
};

// The per-shape operator bundle consumed by the network: weak Laplacian L,
// lumped mass M, tangent frames, complex gradient matrix G, and the first k
// eigenpairs of L phi = lambda M phi (M-orthonormal, ascending).
struct GeometryOperators {
  SparseReal laplacian;
  Eigen::VectorXd mass;
  TangentFrames frames;
  SparseComplex gradient;
  EigenBasis basis; // first k eigenpairs, M-orthonormal
  int k = 0;
  int k_neighbors = 30;
  int n_faces = 0;
  bool oriented = true;
  uint64_t shape_hash = 0;
  OperatorBuildReport report;

  int n_vertices() const { return static_cast<int>(mass.size()); }
};

// Cotan Laplacian: L_ij = -1/2 sum of cotangents opposite edge ij, diagonal
// the negated row sum. Symmetric PSD, L 1 = 0. Degenerate faces are skipped
// and cot values clamped at |cot| <= 1e6 (reported).
SparseReal build_cotan_laplacian(const SurfaceMesh& mesh, OperatorBuildReport* report = nullptr);

// Lumped mass: one third of the incident face area per vertex. Isolated
// vertices get 1e-12 x the mean mass so M stays invertible (reported).
Eigen::VectorXd build_mass_matrix(const SurfaceMesh& mesh, OperatorBuildReport* report = nullptr);

// Laplacian and mass for a point cloud: each point's k nearest neighbors are
// projected to its tangent plane and Delaunay-triangulated; cotan weights and
// lumped areas of the triangles incident to the point accumulate globally
// (scaled by 1/3 since each triangle is seen from its three corners), then L
// is symmetrized. Degenerate neighborhoods fall back to uniform graph
// weights (reported).
std::pair<SparseReal, Eigen::VectorXd>
build_point_cloud_operators(const PointCloud& cloud, OperatorBuildReport* report = nullptr);

// Normals (angle-weighted from faces, or given / covariance-estimated for
// clouds) plus a deterministic tangent basis: e1 is the normalized projection
// of the global x-axis (y-axis when |n . x| > 0.99), e2 = n x e1.
TangentFrames compute_normals_and_frames(const Shape& shape);

// Sparse complex gradient matrix: row v holds the least-squares weights that
// map per-vertex scalars to the tangent-plane gradient at v, encoded as
// complex numbers against (e1, e2). Neighborhoods are 1-rings on meshes and
// k nearest neighbors on clouds.
SparseComplex build_gradient_matrix(const Shape& shape, const TangentFrames& frames,
                                    OperatorBuildReport* report = nullptr);

// FNV-1a over the shape's raw content (positions, faces, normals, kind).
uint64_t shape_content_hash(const Shape& shape);

// Assemble the full bundle, including the eigenbasis (delegates to the
// spectral module's solver).
GeometryOperators compute_operators(const Shape& shape, int k, int k_neighbors = 30);

// Cache serialization: `manifest.json` plus raw little-endian arrays
// (L.csr, mass.f64, evals.f64, evecs.f64, grad.csr, frames.f64, normals.f64).
// Round trips are bit-exact; loading verifies the schema version and array
// dimensions. The checked variant also matches hash/k/k_neighbors against a
// shape and errors on a stale cache.
void save_operators(const GeometryOperators& ops, const std::string& dir);
GeometryOperators load_operators(const std::string& dir);
GeometryOperators load_operators_checked(const std::string& dir, const Shape& shape, int k,
                                         int k_neighbors);

} // namespace dnet

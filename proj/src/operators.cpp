#include "dnet/operators.h"

#include "dnet/delaunay.h"
#include "dnet/geometry.h"
#include "dnet/spectral.h"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <vector>

namespace dnet {

namespace {

constexpr double kCotClamp = 1e6;

double clamp_cot(double cot, OperatorBuildReport* report) {
  if (std::abs(cot) > kCotClamp) {
    if (report) report->clamped_cotans++;
    return cot > 0 ? kCotClamp : -kCotClamp;
  }
  return cot;
}

// Off-diagonal triplets -> symmetric matrix with diagonal = -row sum.
SparseReal finalize_laplacian(int V, const std::vector<Eigen::Triplet<double>>& offdiag) {
  SparseReal off(V, V);
  off.setFromTriplets(offdiag.begin(), offdiag.end());
  Eigen::VectorXd rowsum = off * Eigen::VectorXd::Ones(V);

  std::vector<Eigen::Triplet<double>> all = offdiag;
  all.reserve(all.size() + static_cast<size_t>(V));
  for (int i = 0; i < V; i++) all.emplace_back(i, i, -rowsum[i]);
  SparseReal L(V, V);
  L.setFromTriplets(all.begin(), all.end());
  L.makeCompressed();
  return L;
}

} // namespace

SparseReal build_cotan_laplacian(const SurfaceMesh& mesh, OperatorBuildReport* report) {
  const int V = mesh.n_vertices();
  if (V < 1) throw Error("cotan_laplacian: empty mesh");

  Eigen::RowVector3d lo = mesh.positions.colwise().minCoeff();
  Eigen::RowVector3d hi = mesh.positions.colwise().maxCoeff();
  double bbox2 = (hi - lo).squaredNorm();
  double area_eps = 1e-14 * std::max(bbox2, 1e-300);

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(mesh.n_faces()) * 6);

  for (int f = 0; f < mesh.n_faces(); f++) {
    int vi[3] = {mesh.faces(f, 0), mesh.faces(f, 1), mesh.faces(f, 2)};
    Eigen::Vector3d p[3];
    for (int c = 0; c < 3; c++) p[c] = mesh.positions.row(vi[c]);
    double area = 0.5 * (p[1] - p[0]).cross(p[2] - p[0]).norm();
    if (area < area_eps) {
      if (report) report->degenerate_faces++;
      continue;
    }
    for (int c = 0; c < 3; c++) {
      // corner c is opposite the edge (c+1, c+2)
      Eigen::Vector3d u = p[(c + 1) % 3] - p[c];
      Eigen::Vector3d v = p[(c + 2) % 3] - p[c];
      double cot = clamp_cot(u.dot(v) / u.cross(v).norm(), report);
      double w = 0.5 * cot;
      int a = vi[(c + 1) % 3], b = vi[(c + 2) % 3];
      trip.emplace_back(a, b, -w);
      trip.emplace_back(b, a, -w);
    }
  }
  return finalize_laplacian(V, trip);
}

Eigen::VectorXd build_mass_matrix(const SurfaceMesh& mesh, OperatorBuildReport* report) {
  const int V = mesh.n_vertices();
  Eigen::VectorXd mass = Eigen::VectorXd::Zero(V);
  Eigen::VectorXd areas = face_areas(mesh);
  if (areas.sum() <= 0.0) throw Error("mass_matrix: mesh has zero total area");

  for (int f = 0; f < mesh.n_faces(); f++) {
    double third = areas[f] / 3.0;
    for (int c = 0; c < 3; c++) mass[mesh.faces(f, c)] += third;
  }

  double mean = mass.sum() / V;
  for (int i = 0; i < V; i++) {
    if (mass[i] <= 0.0) {
      mass[i] = 1e-12 * mean;
      if (report) report->isolated_vertices++;
    }
  }
  return mass;
}

namespace {

// Smallest-eigenvector normal of a local covariance; returns false when the
// neighborhood is degenerate (rank < 2).
bool covariance_normal(const Eigen::MatrixXd& positions, int center,
                       const std::vector<int>& nbrs, Eigen::Vector3d& normal) {
  Eigen::RowVector3d mean = positions.row(center);
  for (int j : nbrs) mean += positions.row(j);
  mean /= static_cast<double>(nbrs.size() + 1);

  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  auto add = [&](int idx) {
    Eigen::Vector3d d = (positions.row(idx) - mean).transpose();
    cov += d * d.transpose();
  };
  add(center);
  for (int j : nbrs) add(j);

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> es(cov);
  if (es.info() != Eigen::Success) return false;
  if (es.eigenvalues()[1] <= 1e-14 * std::max(es.eigenvalues()[2], 1e-300)) return false;
  normal = es.eigenvectors().col(0);
  // deterministic sign: largest-magnitude component positive
  int arg = 0;
  normal.cwiseAbs().maxCoeff(&arg);
  if (normal[arg] < 0) normal = -normal;
  return true;
}

void frame_from_normal(const Eigen::Vector3d& n, Eigen::Vector3d& e1, Eigen::Vector3d& e2) {
  Eigen::Vector3d ref = Eigen::Vector3d::UnitX();
  if (std::abs(n.x()) > 0.99) ref = Eigen::Vector3d::UnitY();
  e1 = (ref - n.dot(ref) * n).normalized();
  e2 = n.cross(e1);
}

} // namespace

TangentFrames compute_normals_and_frames(const Shape& shape) {
  const Eigen::MatrixXd& P = shape.positions();
  const int V = static_cast<int>(P.rows());
  TangentFrames fr;
  fr.normals.resize(V, 3);
  fr.e1.resize(V, 3);
  fr.e2.resize(V, 3);

  std::vector<std::vector<int>> nbrs;
  if (shape.is_mesh()) {
    const SurfaceMesh& mesh = shape.mesh;
    Eigen::MatrixXd fn = face_normals(mesh);
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(V, 3);
    for (int f = 0; f < mesh.n_faces(); f++) {
      for (int c = 0; c < 3; c++) {
        int vc = mesh.faces(f, c);
        Eigen::Vector3d u = (mesh.positions.row(mesh.faces(f, (c + 1) % 3)) - mesh.positions.row(vc)).transpose();
        Eigen::Vector3d v = (mesh.positions.row(mesh.faces(f, (c + 2) % 3)) - mesh.positions.row(vc)).transpose();
        double nu = u.norm(), nv = v.norm();
        if (nu <= 0 || nv <= 0) continue;
        double angle = std::acos(std::clamp(u.dot(v) / (nu * nv), -1.0, 1.0));
        acc.row(vc) += angle * fn.row(f);
      }
    }
    nbrs = vertex_one_rings(mesh);
    for (int i = 0; i < V; i++) {
      Eigen::Vector3d n = acc.row(i).transpose();
      double len = n.norm();
      if (len > 1e-12) {
        n /= len;
      } else {
        // degenerate star: covariance fallback
        if (nbrs[static_cast<size_t>(i)].size() < 2 ||
            !covariance_normal(P, i, nbrs[static_cast<size_t>(i)], n))
          n = Eigen::Vector3d::UnitZ();
      }
      fr.normals.row(i) = n.transpose();
    }
  } else {
    const PointCloud& cloud = shape.cloud;
    if (cloud.normals) {
      fr.normals = *cloud.normals;
    } else {
      nbrs = k_nearest_neighbors(P, cloud.k_neighbors);
      for (int i = 0; i < V; i++) {
        Eigen::Vector3d n;
        if (!covariance_normal(P, i, nbrs[static_cast<size_t>(i)], n)) n = Eigen::Vector3d::UnitZ();
        fr.normals.row(i) = n.transpose();
      }
    }
  }

  for (int i = 0; i < V; i++) {
    Eigen::Vector3d n = fr.normals.row(i).transpose();
    Eigen::Vector3d e1, e2;
    frame_from_normal(n, e1, e2);
    fr.e1.row(i) = e1.transpose();
    fr.e2.row(i) = e2.transpose();
  }
  return fr;
}

std::pair<SparseReal, Eigen::VectorXd>
build_point_cloud_operators(const PointCloud& cloud, OperatorBuildReport* report) {
  const int V = cloud.n_vertices();
  const int k = cloud.k_neighbors;
  if (k < 3) throw Error("point_cloud_operators: k_neighbors must be >= 3");
  if (V <= k) throw Error("point_cloud_operators: need more points than k_neighbors");

  Shape as_shape = Shape::from_cloud(cloud);
  TangentFrames frames = compute_normals_and_frames(as_shape);
  std::vector<std::vector<int>> nbrs = k_nearest_neighbors(cloud.positions, k);

  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<size_t>(V) * 20);
  Eigen::VectorXd mass = Eigen::VectorXd::Zero(V);

  // Each triangle of a local one-ring is (approximately) seen from all three
  // of its corners, so contributions are scaled by 1/3.
  const double scale = 1.0 / 3.0;

  for (int i = 0; i < V; i++) {
    const auto& nb = nbrs[static_cast<size_t>(i)];
    Eigen::Vector3d e1 = frames.e1.row(i).transpose();
    Eigen::Vector3d e2 = frames.e2.row(i).transpose();

    std::vector<Eigen::Vector2d> local(nb.size() + 1);
    local[0] = Eigen::Vector2d::Zero(); // center
    for (size_t j = 0; j < nb.size(); j++) {
      Eigen::Vector3d d =
          (cloud.positions.row(nb[j]) - cloud.positions.row(i)).transpose();
      local[j + 1] = Eigen::Vector2d(d.dot(e1), d.dot(e2));
    }

    std::vector<std::array<int, 3>> tris;
    bool ok = true;
    try {
      tris = delaunay_2d(local);
    } catch (const Error&) {
      ok = false;
    }

    if (!ok) {
      if (report) report->fallback_points++;
      double w = 1.0 / static_cast<double>(nb.size());
      for (int j : nb) {
        trip.emplace_back(i, j, -w);
        trip.emplace_back(j, i, -w);
      }
      continue;
    }

    auto global_id = [&](int local_id) { return local_id == 0 ? i : nb[static_cast<size_t>(local_id - 1)]; };

    for (const auto& t : tris) {
      if (t[0] != 0 && t[1] != 0 && t[2] != 0) continue; // only the center's ring
      Eigen::Vector2d q[3] = {local[static_cast<size_t>(t[0])], local[static_cast<size_t>(t[1])],
                              local[static_cast<size_t>(t[2])]};
      double area2 = std::abs((q[1] - q[0]).x() * (q[2] - q[0]).y() -
                              (q[1] - q[0]).y() * (q[2] - q[0]).x());
      double area = 0.5 * area2;
      if (area <= 0) continue;
      for (int c = 0; c < 3; c++) {
        Eigen::Vector2d u = q[(c + 1) % 3] - q[c];
        Eigen::Vector2d v = q[(c + 2) % 3] - q[c];
        double cross = std::abs(u.x() * v.y() - u.y() * v.x());
        if (cross <= 0) continue;
        double cot = clamp_cot(u.dot(v) / cross, report);
        double w = 0.5 * cot * scale;
        int a = global_id(t[(c + 1) % 3]), b = global_id(t[(c + 2) % 3]);
        trip.emplace_back(a, b, -w);
        trip.emplace_back(b, a, -w);
        mass[global_id(t[c])] += area / 3.0 * scale;
      }
    }
  }

  // Symmetrize: L_off was accumulated per-neighborhood and local rings need
  // not agree, so average with the transpose before fixing the diagonal.
  SparseReal off(V, V);
  off.setFromTriplets(trip.begin(), trip.end());
  SparseReal offT = SparseReal(off.transpose());
  off = 0.5 * (off + offT);
  Eigen::VectorXd rowsum = off * Eigen::VectorXd::Ones(V);

  std::vector<Eigen::Triplet<double>> all;
  all.reserve(static_cast<size_t>(off.nonZeros()) + static_cast<size_t>(V));
  for (int c = 0; c < off.outerSize(); c++)
    for (SparseReal::InnerIterator it(off, c); it; ++it)
      if (it.row() != it.col()) all.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  for (int i = 0; i < V; i++) all.emplace_back(i, i, -rowsum[i]);
  SparseReal L(V, V);
  L.setFromTriplets(all.begin(), all.end());
  L.makeCompressed();

  double mean_mass = mass.sum() / V;
  for (int i = 0; i < V; i++) {
    if (mass[i] <= 0.0) {
      mass[i] = 1e-12 * std::max(mean_mass, 1e-300);
      if (report) report->isolated_vertices++;
    }
  }
  return {std::move(L), std::move(mass)};
}

SparseComplex build_gradient_matrix(const Shape& shape, const TangentFrames& frames,
                                    OperatorBuildReport* report) {
  const Eigen::MatrixXd& P = shape.positions();
  const int V = static_cast<int>(P.rows());

  std::vector<std::vector<int>> nbrs;
  if (shape.is_mesh())
    nbrs = vertex_one_rings(shape.mesh);
  else
    nbrs = k_nearest_neighbors(P, shape.cloud.k_neighbors);

  std::vector<Eigen::Triplet<std::complex<double>>> trip;
  trip.reserve(static_cast<size_t>(V) * 8);

  for (int i = 0; i < V; i++) {
    const auto& nb = nbrs[static_cast<size_t>(i)];
    const int m = static_cast<int>(nb.size());
    if (m < 2) {
      if (report) report->regularized_rows++;
      continue; // leave the row empty (gradient undefined at isolated points)
    }
    Eigen::Vector3d e1 = frames.e1.row(i).transpose();
    Eigen::Vector3d e2 = frames.e2.row(i).transpose();

    Eigen::MatrixXd D(m, 2);
    double mean_d2 = 0.0;
    for (int j = 0; j < m; j++) {
      Eigen::Vector3d d = (P.row(nb[static_cast<size_t>(j)]) - P.row(i)).transpose();
      D(j, 0) = d.dot(e1);
      D(j, 1) = d.dot(e2);
      mean_d2 += D.row(j).squaredNorm();
    }
    mean_d2 /= m;

    Eigen::Matrix2d DtD = D.transpose() * D;
    // rank check via the 2x2 spectrum
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(DtD);
    if (es.eigenvalues()[0] <= 1e-10 * std::max(es.eigenvalues()[1], 1e-300)) {
      DtD += 1e-8 * mean_d2 * Eigen::Matrix2d::Identity();
      if (report) report->regularized_rows++;
    }
    Eigen::Matrix<double, 2, Eigen::Dynamic> W = DtD.ldlt().solve(D.transpose());

    std::complex<double> center(0.0, 0.0);
    for (int j = 0; j < m; j++) {
      std::complex<double> w(W(0, j), W(1, j));
      trip.emplace_back(i, nb[static_cast<size_t>(j)], w);
      center -= w;
    }
    trip.emplace_back(i, i, center);
  }

  SparseComplex G(V, V);
  G.setFromTriplets(trip.begin(), trip.end());
  G.makeCompressed();
  return G;
}

uint64_t shape_content_hash(const Shape& shape) {
  uint64_t h = 1469598103934665603ull; // FNV-1a offset basis
  auto mix_bytes = [&h](const void* data, size_t n) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (size_t i = 0; i < n; i++) {
      h ^= p[i];
      h *= 1099511628211ull;
    }
  };
  auto mix_matrix_d = [&](const Eigen::MatrixXd& M) {
    for (int i = 0; i < M.rows(); i++)
      for (int j = 0; j < M.cols(); j++) {
        double v = M(i, j);
        mix_bytes(&v, sizeof(v));
      }
  };

  uint32_t kind = shape.is_mesh() ? 0u : 1u;
  mix_bytes(&kind, sizeof(kind));
  mix_matrix_d(shape.positions());
  if (shape.is_mesh()) {
    const Eigen::MatrixXi& F = shape.mesh.faces;
    for (int i = 0; i < F.rows(); i++)
      for (int j = 0; j < 3; j++) {
        int32_t v = F(i, j);
        mix_bytes(&v, sizeof(v));
      }
  } else if (shape.cloud.normals) {
    mix_matrix_d(*shape.cloud.normals);
  }
  return h;
}

GeometryOperators compute_operators(const Shape& shape_in, int k, int k_neighbors) {
  Shape shape = shape_in;
  if (!shape.is_mesh()) shape.cloud.k_neighbors = k_neighbors;
  validate_shape(shape);

  GeometryOperators ops;
  ops.k = k;
  ops.oriented = shape.oriented;
  ops.shape_hash = shape_content_hash(shape);

  if (shape.is_mesh()) {
    ops.k_neighbors = 0;
    ops.n_faces = shape.mesh.n_faces();
    ops.laplacian = build_cotan_laplacian(shape.mesh, &ops.report);
    ops.mass = build_mass_matrix(shape.mesh, &ops.report);
  } else {
    ops.k_neighbors = k_neighbors;
    std::tie(ops.laplacian, ops.mass) = build_point_cloud_operators(shape.cloud, &ops.report);
  }

  ops.frames = compute_normals_and_frames(shape);
  ops.gradient = build_gradient_matrix(shape, ops.frames, &ops.report);

  ops.basis = solve_eigenbasis(ops.laplacian, ops.mass, k);
  return ops;
}

} // namespace dnet

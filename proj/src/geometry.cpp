#include "dnet/geometry.h"

#include "dnet/rng.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>

namespace dnet {

Eigen::VectorXd face_areas(const SurfaceMesh& mesh) {
  Eigen::VectorXd A(mesh.n_faces());
  for (int f = 0; f < mesh.n_faces(); f++) {
    Eigen::Vector3d a = mesh.positions.row(mesh.faces(f, 0));
    Eigen::Vector3d b = mesh.positions.row(mesh.faces(f, 1));
    Eigen::Vector3d c = mesh.positions.row(mesh.faces(f, 2));
    A[f] = 0.5 * (b - a).cross(c - a).norm();
  }
  return A;
}

Eigen::MatrixXd face_normals(const SurfaceMesh& mesh) {
  Eigen::MatrixXd N(mesh.n_faces(), 3);
  for (int f = 0; f < mesh.n_faces(); f++) {
    Eigen::Vector3d a = mesh.positions.row(mesh.faces(f, 0));
    Eigen::Vector3d b = mesh.positions.row(mesh.faces(f, 1));
    Eigen::Vector3d c = mesh.positions.row(mesh.faces(f, 2));
    Eigen::Vector3d n = (b - a).cross(c - a);
    double len = n.norm();
    N.row(f) = len > 0 ? (n / len).transpose().eval() : Eigen::RowVector3d(0, 0, 0);
  }
  return N;
}

double total_area(const SurfaceMesh& mesh) { return face_areas(mesh).sum(); }

Shape sample_point_cloud(const Shape& mesh_shape, int n, uint64_t seed, int k_neighbors) {
  if (!mesh_shape.is_mesh()) throw Error("sample_point_cloud: input must be a mesh");
  const SurfaceMesh& mesh = mesh_shape.mesh;
  if (n < 1) throw Error("sample_point_cloud: n must be positive");

  Eigen::VectorXd areas = face_areas(mesh);
  double total = areas.sum();
  if (total <= 0.0) throw Error("sample_point_cloud: mesh has zero total area");

  // Inverse-CDF sampling over the cumulative face areas.
  std::vector<double> cdf(static_cast<size_t>(areas.size()));
  double acc = 0.0;
  for (int f = 0; f < areas.size(); f++) {
    acc += areas[f];
    cdf[static_cast<size_t>(f)] = acc;
  }

  Eigen::MatrixXd fnormals = face_normals(mesh);
  Rng rng(seed);

  PointCloud cloud;
  cloud.positions.resize(n, 3);
  Eigen::MatrixXd normals(n, 3);
  Eigen::VectorXi labels(n);
  const bool has_labels = mesh_shape.labels.has_value();

  for (int i = 0; i < n; i++) {
    double target = rng.uniform() * total;
    int f = static_cast<int>(std::lower_bound(cdf.begin(), cdf.end(), target) - cdf.begin());
    f = std::min<int>(f, static_cast<int>(cdf.size()) - 1);

    double u = rng.uniform(), v = rng.uniform();
    if (u + v > 1.0) {
      u = 1.0 - u;
      v = 1.0 - v;
    }
    int ia = mesh.faces(f, 0), ib = mesh.faces(f, 1), ic = mesh.faces(f, 2);
    Eigen::RowVector3d a = mesh.positions.row(ia);
    Eigen::RowVector3d b = mesh.positions.row(ib);
    Eigen::RowVector3d c = mesh.positions.row(ic);
    Eigen::RowVector3d p = a + u * (b - a) + v * (c - a);
    cloud.positions.row(i) = p;
    normals.row(i) = fnormals.row(f);

    if (has_labels) {
      double da = (p - a).squaredNorm(), db = (p - b).squaredNorm(), dc = (p - c).squaredNorm();
      int nearest = ia;
      double best = da;
      if (db < best) {
        best = db;
        nearest = ib;
      }
      if (dc < best) nearest = ic;
      labels[i] = (*mesh_shape.labels)[nearest];
    }
  }

  cloud.normals = std::move(normals);
  cloud.k_neighbors = k_neighbors;
  Shape out = Shape::from_cloud(std::move(cloud));
  if (has_labels) out.labels = labels;
  return out;
}

Shape midpoint_refine(const Shape& mesh_shape) {
  if (!mesh_shape.is_mesh()) throw Error("midpoint_refine: input must be a mesh");
  const SurfaceMesh& in = mesh_shape.mesh;

  std::map<std::pair<int, int>, int> midpoint;
  std::vector<Eigen::RowVector3d> verts;
  std::vector<int> labels;
  const bool has_labels = mesh_shape.labels.has_value();
  for (int i = 0; i < in.positions.rows(); i++) {
    verts.push_back(in.positions.row(i));
    if (has_labels) labels.push_back((*mesh_shape.labels)[i]);
  }

  auto mid = [&](int a, int b) {
    auto key = std::minmax(a, b);
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    int id = static_cast<int>(verts.size());
    verts.push_back(0.5 * (in.positions.row(a) + in.positions.row(b)));
    if (has_labels) labels.push_back((*mesh_shape.labels)[key.first]); // equidistant: smaller index wins
    midpoint.emplace(key, id);
    return id;
  };

  SurfaceMesh out;
  out.faces.resize(in.faces.rows() * 4, 3);
  int f = 0;
  for (int t = 0; t < in.faces.rows(); t++) {
    int a = in.faces(t, 0), b = in.faces(t, 1), c = in.faces(t, 2);
    int ab = mid(a, b), bc = mid(b, c), ca = mid(c, a);
    out.faces.row(f++) << a, ab, ca;
    out.faces.row(f++) << b, bc, ab;
    out.faces.row(f++) << c, ca, bc;
    out.faces.row(f++) << ab, bc, ca;
  }
  out.positions.resize(static_cast<int>(verts.size()), 3);
  for (size_t i = 0; i < verts.size(); i++) out.positions.row(static_cast<int>(i)) = verts[i];

  Shape result = Shape::from_mesh(std::move(out));
  if (has_labels) {
    Eigen::VectorXi L(static_cast<int>(labels.size()));
    for (size_t i = 0; i < labels.size(); i++) L[static_cast<int>(i)] = labels[i];
    result.labels = L;
  }
  result.class_label = mesh_shape.class_label;
  return result;
}

std::vector<std::vector<int>> k_nearest_neighbors(const Eigen::MatrixXd& positions, int k) {
  const int V = static_cast<int>(positions.rows());
  if (k >= V) throw Error("k_nearest_neighbors: k must be smaller than the point count");
  std::vector<std::vector<int>> out(static_cast<size_t>(V));

  std::vector<std::pair<double, int>> dist(static_cast<size_t>(V));
  for (int i = 0; i < V; i++) {
    for (int j = 0; j < V; j++)
      dist[static_cast<size_t>(j)] = {(positions.row(j) - positions.row(i)).squaredNorm(), j};
    dist[static_cast<size_t>(i)].first = std::numeric_limits<double>::infinity();
    std::nth_element(dist.begin(), dist.begin() + k, dist.end());
    std::sort(dist.begin(), dist.begin() + k);
    auto& nb = out[static_cast<size_t>(i)];
    nb.resize(static_cast<size_t>(k));
    for (int j = 0; j < k; j++) nb[static_cast<size_t>(j)] = dist[static_cast<size_t>(j)].second;
  }
  return out;
}

std::vector<std::vector<int>> vertex_one_rings(const SurfaceMesh& mesh) {
  std::vector<std::vector<int>> ring(static_cast<size_t>(mesh.n_vertices()));
  for (int f = 0; f < mesh.n_faces(); f++) {
    for (int c = 0; c < 3; c++) {
      int a = mesh.faces(f, c), b = mesh.faces(f, (c + 1) % 3);
      ring[static_cast<size_t>(a)].push_back(b);
      ring[static_cast<size_t>(b)].push_back(a);
    }
  }
  for (auto& r : ring) {
    std::sort(r.begin(), r.end());
    r.erase(std::unique(r.begin(), r.end()), r.end());
  }
  return ring;
}

} // namespace dnet

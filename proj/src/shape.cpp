#include "dnet/shape.h"

#include <cmath>

namespace dnet {

Shape Shape::from_mesh(SurfaceMesh m) {
  Shape s;
  s.kind = Kind::Mesh;
  s.mesh = std::move(m);
  s.oriented = true;
  return s;
}

Shape Shape::from_cloud(PointCloud c) {
  Shape s;
  s.kind = Kind::Cloud;
  s.oriented = c.normals.has_value();
  s.cloud = std::move(c);
  return s;
}

void validate_shape(const Shape& shape) {
  const Eigen::MatrixXd& P = shape.positions();
  if (P.rows() < 1 || P.cols() != 3) throw Error("shape: positions must be V x 3 with V >= 1");
  if (!P.allFinite()) throw Error("shape: positions contain NaN or Inf");

  if (shape.is_mesh()) {
    const Eigen::MatrixXi& F = shape.mesh.faces;
    const int V = shape.mesh.n_vertices();
    for (int f = 0; f < F.rows(); f++) {
      for (int c = 0; c < 3; c++) {
        int v = F(f, c);
        if (v < 0 || v >= V)
          throw Error("mesh: face " + std::to_string(f) + " has out-of-range vertex index " +
                      std::to_string(v));
      }
      if (F(f, 0) == F(f, 1) || F(f, 1) == F(f, 2) || F(f, 0) == F(f, 2))
        throw Error("mesh: face " + std::to_string(f) + " repeats a vertex");
    }
  } else {
    const PointCloud& c = shape.cloud;
    if (c.k_neighbors < 1) throw Error("cloud: k_neighbors must be positive");
    if (c.k_neighbors >= c.n_vertices())
      throw Error("cloud: k_neighbors (" + std::to_string(c.k_neighbors) +
                  ") must be smaller than the number of points (" +
                  std::to_string(c.n_vertices()) + ")");
    if (c.normals) {
      if (c.normals->rows() != c.positions.rows() || c.normals->cols() != 3)
        throw Error("cloud: normals must be V x 3");
      for (int i = 0; i < c.normals->rows(); i++) {
        double n = c.normals->row(i).norm();
        if (std::abs(n - 1.0) > 1e-6)
          throw Error("cloud: normal " + std::to_string(i) + " is not unit length");
      }
    }
  }

  if (shape.labels && shape.labels->size() != shape.n_vertices())
    throw Error("shape: label array length does not match vertex count");
}

NormalizeTransform normalize_positions(Eigen::MatrixXd& positions) {
  if (positions.rows() < 1) throw Error("normalize: empty position array");
  if (!positions.allFinite()) throw Error("normalize: positions contain NaN or Inf");

  NormalizeTransform t;
  t.center = positions.colwise().mean();
  positions.rowwise() -= t.center;
  t.scale = positions.rowwise().norm().maxCoeff();
  if (t.scale <= 0.0) throw Error("normalize: all points coincident, scale undefined");
  positions /= t.scale;
  return t;
}

void normalize_shape(Shape& shape) { normalize_positions(shape.positions()); }

} // namespace dnet

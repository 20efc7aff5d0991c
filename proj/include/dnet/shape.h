#pragma once

#include <Eigen/Core>
#include <optional>
#include <stdexcept>
#include <string>

namespace dnet {

class Error : public std::runtime_error {
public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Triangle mesh: V x 3 positions, F x 3 vertex indices (counter-clockwise
// winding when the mesh is consistently oriented).
struct SurfaceMesh {
  Eigen::MatrixXd positions; // V x 3
  Eigen::MatrixXi faces;     // F x 3

  int n_vertices() const { return static_cast<int>(positions.rows()); }
  int n_faces() const { return static_cast<int>(faces.rows()); }
};

// Point cloud: V x 3 positions, optional unit normals, and the neighborhood
// size used when assembling operators.
struct PointCloud {
  Eigen::MatrixXd positions;              // V x 3
  std::optional<Eigen::MatrixXd> normals; // V x 3, unit length
  int k_neighbors = 30;

  int n_vertices() const { return static_cast<int>(positions.rows()); }
};

// A mesh or a point cloud, plus optional task labels.
//
// `oriented` marks whether the discretization carries a consistent
// orientation (meshes with consistent winding, clouds with given normals);
// unoriented shapes must use real-valued gradient-feature matrices.
struct Shape {
  enum class Kind { Mesh, Cloud };

  Kind kind = Kind::Mesh;
  SurfaceMesh mesh;
  PointCloud cloud;
  bool oriented = true;

  std::optional<Eigen::VectorXi> labels; // per-vertex, length V
  std::optional<int> class_label;

  static Shape from_mesh(SurfaceMesh m);
  static Shape from_cloud(PointCloud c);

  bool is_mesh() const { return kind == Kind::Mesh; }
  int n_vertices() const { return is_mesh() ? mesh.n_vertices() : cloud.n_vertices(); }
  const Eigen::MatrixXd& positions() const { return is_mesh() ? mesh.positions : cloud.positions; }
  Eigen::MatrixXd& positions() { return is_mesh() ? mesh.positions : cloud.positions; }
};

// Throws Error if the invariants don't hold (indices in range, no repeated
// vertex within a face, finite positions, unit normals, labels sized V).
void validate_shape(const Shape& shape);

// Recenter to the centroid and scale so the farthest vertex sits on the unit
// sphere. Returns {scale, center} of the applied transform
// p' = (p - center) / scale. Throws if all points coincide.
struct NormalizeTransform {
  double scale = 1.0;
  Eigen::RowVector3d center = Eigen::RowVector3d::Zero();
};
NormalizeTransform normalize_positions(Eigen::MatrixXd& positions);
void normalize_shape(Shape& shape);

} // namespace dnet

#pragma once

#include "dnet/shape.h"

#include <cstdint>
#include <vector>

namespace dnet {

Eigen::VectorXd face_areas(const SurfaceMesh& mesh);
Eigen::MatrixXd face_normals(const SurfaceMesh& mesh); // unit, F x 3
double total_area(const SurfaceMesh& mesh);

// Area-uniform point sampling: faces chosen proportional to area, positions
// barycentric-uniform within the face. Normals come from the face; labels
// (when the mesh has them) transfer from the nearest vertex of the source
// face. Deterministic for a fixed seed.
Shape sample_point_cloud(const Shape& mesh_shape, int n, uint64_t seed, int k_neighbors = 30);

// 1:4 subdivision at edge midpoints. V' = V + E, F' = 4 F. Labels (when
// present) transfer to midpoint vertices from the nearest original endpoint
// (ties broken toward the smaller vertex index).
Shape midpoint_refine(const Shape& mesh_shape);

// Indices of the k nearest neighbors of every point (excluding the point
// itself), ordered by increasing distance.
std::vector<std::vector<int>> k_nearest_neighbors(const Eigen::MatrixXd& positions, int k);

// Vertex -> vertex adjacency from faces (sorted, deduplicated).
std::vector<std::vector<int>> vertex_one_rings(const SurfaceMesh& mesh);

} // namespace dnet

#pragma once

#include <Eigen/Core>
#include <array>
#include <vector>

namespace dnet {

// Delaunay triangulation of a small 2D point set (Bowyer-Watson). Returns
// triangles as index triples into `points`, counter-clockwise. Intended for
// the ~30-point neighborhoods of the point-cloud Laplacian; throws on
// fully degenerate input (all points collinear).
std::vector<std::array<int, 3>> delaunay_2d(const std::vector<Eigen::Vector2d>& points);

} // namespace dnet

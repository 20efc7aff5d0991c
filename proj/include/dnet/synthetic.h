#pragma once

#include "dnet/shape.h"

#include <cstdint>
#include <utility>
#include <vector>

namespace dnet {

// Regular triangulated n x n grid covering [0,1]^2 at z = 0.
// V = n^2, F = 2 (n-1)^2.
SurfaceMesh make_flat_grid(int n);

// Unit icosphere: subdivided icosahedron projected to the unit sphere.
// subdiv = 0 gives V = 12, F = 20; each level quadruples the face count.
SurfaceMesh make_icosphere(int subdivisions);

struct BumpySphereParams {
  int subdivisions = 3;
  int n_bumps = 2;
  double amplitude = 0.18;
  // Angular bump widths (radians); bump id b uses widths[b]. Sized n_bumps,
  // or empty to spread widths geometrically between width_min and width_max.
  std::vector<double> widths;
  double width_min = 0.25;
  double width_max = 0.55;
  double width_jitter = 0.08;   // relative jitter on each width
  double label_radius_mult = 1.3; // vertices within mult * width get the bump label
  double min_separation = 1.1;  // centers at least mult * (w_a + w_b) apart
};

// Unit sphere with Gaussian bumps displaced along the normal, labeled by
// nearest bump id (1-based; 0 = background). Bump centers are placed by
// rejection sampling with a minimum angular separation; bump b's width is
// drawn around widths[b], so labels correspond to bump size classes.
Shape make_bumpy_sphere(const BumpySphereParams& params, uint64_t seed);

struct MirroredPairParams {
  int subdivisions = 2;
  double amplitude = 0.22;
  double amplitude_jitter = 0.25;
  double width_jitter = 0.1;
};

// A chiral bumpy sphere (three bumps of distinct sizes at the corners of a
// right-handed orthonormal triple) and its mirror image across x = 0 with
// triangle winding flipped to keep normals outward. The pair is isometric,
// so purely intrinsic descriptors cannot tell the two apart; only the
// orientation differs. Class labels: 0 = original, 1 = mirrored.
std::pair<Shape, Shape> make_mirrored_pair(const MirroredPairParams& params, uint64_t seed);

// Mirror any mesh across x = 0, flipping winding to preserve outward normals.
SurfaceMesh mirror_mesh(const SurfaceMesh& mesh);

} // namespace dnet

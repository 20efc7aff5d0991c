#include "dnet/synthetic.h"

#include "dnet/rng.h"

#include <Eigen/Geometry>
#include <algorithm>
#include <array>
#include <cmath>
#include <map>

namespace dnet {

SurfaceMesh make_flat_grid(int n) {
  if (n < 2) throw Error("flat_grid: resolution must be >= 2");
  SurfaceMesh m;
  m.positions.resize(n * n, 3);
  const double h = 1.0 / (n - 1);
  for (int j = 0; j < n; j++)
    for (int i = 0; i < n; i++) m.positions.row(j * n + i) << i * h, j * h, 0.0;

  m.faces.resize(2 * (n - 1) * (n - 1), 3);
  int f = 0;
  for (int j = 0; j < n - 1; j++) {
    for (int i = 0; i < n - 1; i++) {
      int v00 = j * n + i, v10 = j * n + i + 1;
      int v01 = (j + 1) * n + i, v11 = (j + 1) * n + i + 1;
      m.faces.row(f++) << v00, v10, v11;
      m.faces.row(f++) << v00, v11, v01;
    }
  }
  return m;
}

namespace {

SurfaceMesh icosahedron() {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  Eigen::MatrixXd P(12, 3);
  P << -1, phi, 0, 1, phi, 0, -1, -phi, 0, 1, -phi, 0, 0, -1, phi, 0, 1, phi, 0, -1, -phi, 0, 1,
      -phi, phi, 0, -1, phi, 0, 1, -phi, 0, -1, -phi, 0, 1;
  P.rowwise().normalize();
  Eigen::MatrixXi F(20, 3);
  F << 0, 11, 5, 0, 5, 1, 0, 1, 7, 0, 7, 10, 0, 10, 11, 1, 5, 9, 5, 11, 4, 11, 10, 2, 10, 7, 6, 7,
      1, 8, 3, 9, 4, 3, 4, 2, 3, 2, 6, 3, 6, 8, 3, 8, 9, 4, 9, 5, 2, 4, 11, 6, 2, 10, 8, 6, 7, 9,
      8, 1;
  SurfaceMesh m;
  m.positions = P;
  m.faces = F;
  return m;
}

SurfaceMesh subdivide_once(const SurfaceMesh& in) {
  std::map<std::pair<int, int>, int> midpoint;
  std::vector<Eigen::RowVector3d> verts;
  verts.reserve(static_cast<size_t>(in.positions.rows()) * 4);
  for (int i = 0; i < in.positions.rows(); i++) verts.push_back(in.positions.row(i));

  auto mid = [&](int a, int b) {
    auto key = std::minmax(a, b);
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    int id = static_cast<int>(verts.size());
    verts.push_back(0.5 * (in.positions.row(a) + in.positions.row(b)));
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
  return out;
}

} // namespace

SurfaceMesh make_icosphere(int subdivisions) {
  if (subdivisions < 0) throw Error("icosphere: subdivisions must be >= 0");
  SurfaceMesh m = icosahedron();
  for (int s = 0; s < subdivisions; s++) {
    m = subdivide_once(m);
    m.positions.rowwise().normalize();
  }
  return m;
}

Shape make_bumpy_sphere(const BumpySphereParams& params, uint64_t seed) {
  if (params.n_bumps < 1) throw Error("bumpy_sphere: need at least one bump");
  Rng rng(seed);
  SurfaceMesh sphere = make_icosphere(params.subdivisions);
  const int V = sphere.n_vertices();

  std::vector<double> widths = params.widths;
  if (widths.empty()) {
    widths.resize(static_cast<size_t>(params.n_bumps));
    for (int b = 0; b < params.n_bumps; b++) {
      double t = params.n_bumps == 1 ? 0.5 : double(b) / (params.n_bumps - 1);
      widths[static_cast<size_t>(b)] =
          params.width_min * std::pow(params.width_max / params.width_min, t);
    }
  }
  if (static_cast<int>(widths.size()) != params.n_bumps)
    throw Error("bumpy_sphere: widths must be sized n_bumps");

  // Rejection-sample bump centers on the sphere with angular separation.
  std::vector<Eigen::Vector3d> centers;
  std::vector<double> sigmas;
  for (int b = 0; b < params.n_bumps; b++) {
    double sigma = widths[static_cast<size_t>(b)] * (1.0 + params.width_jitter * (2.0 * rng.uniform() - 1.0));
    bool placed = false;
    for (int attempt = 0; attempt < 4000 && !placed; attempt++) {
      Eigen::Vector3d c(rng.normal(), rng.normal(), rng.normal());
      if (c.norm() < 1e-8) continue;
      c.normalize();
      placed = true;
      for (size_t j = 0; j < centers.size(); j++) {
        double ang = std::acos(std::clamp(c.dot(centers[j]), -1.0, 1.0));
        double min_sep = params.min_separation *
                         (params.label_radius_mult * sigma + params.label_radius_mult * sigmas[j]);
        if (ang < min_sep) {
          placed = false;
          break;
        }
      }
      if (placed) {
        centers.push_back(c);
        sigmas.push_back(sigma);
      }
    }
    if (!placed) throw Error("bumpy_sphere: could not place bumps with requested separation");
  }

  Eigen::VectorXi labels = Eigen::VectorXi::Zero(V);
  for (int v = 0; v < V; v++) {
    Eigen::Vector3d p = sphere.positions.row(v).transpose();
    double height = 0.0;
    double best_ang = 1e30;
    int best_bump = -1;
    for (int b = 0; b < params.n_bumps; b++) {
      double ang = std::acos(std::clamp(p.dot(centers[static_cast<size_t>(b)]), -1.0, 1.0));
      height += params.amplitude * std::exp(-0.5 * ang * ang / (sigmas[static_cast<size_t>(b)] * sigmas[static_cast<size_t>(b)]));
      if (ang < best_ang) {
        best_ang = ang;
        best_bump = b;
      }
    }
    if (best_bump >= 0 && best_ang <= params.label_radius_mult * sigmas[static_cast<size_t>(best_bump)])
      labels[v] = best_bump + 1;
    sphere.positions.row(v) = ((1.0 + height) * p).transpose();
  }

  Shape s = Shape::from_mesh(std::move(sphere));
  s.labels = labels;
  return s;
}

SurfaceMesh mirror_mesh(const SurfaceMesh& mesh) {
  SurfaceMesh out = mesh;
  out.positions.col(0) *= -1.0;
  out.faces.col(1).swap(out.faces.col(2));
  return out;
}

std::pair<Shape, Shape> make_mirrored_pair(const MirroredPairParams& params, uint64_t seed) {
  Rng rng(seed);
  SurfaceMesh sphere = make_icosphere(params.subdivisions);
  const int V = sphere.n_vertices();

  // Three bumps with well-separated sizes at the corners of a right-handed
  // orthonormal triple; a random rotation varies the placement per sample
  // without changing the handedness of the (large, medium, small) ordering.
  double a0 = params.amplitude;
  std::array<double, 3> amps = {a0 * 1.0, a0 * 0.65, a0 * 0.35};
  std::array<double, 3> sigs = {0.50, 0.38, 0.28};
  for (auto& a : amps) a *= 1.0 + params.amplitude_jitter * (2.0 * rng.uniform() - 1.0);
  for (auto& s : sigs) s *= 1.0 + params.width_jitter * (2.0 * rng.uniform() - 1.0);

  Eigen::Vector3d axis(rng.normal(), rng.normal(), rng.normal());
  if (axis.norm() < 1e-8) axis = Eigen::Vector3d::UnitZ();
  axis.normalize();
  double angle = rng.uniform(0.0, 2.0 * M_PI);
  Eigen::Matrix3d R = Eigen::AngleAxisd(angle, axis).toRotationMatrix();
  std::array<Eigen::Vector3d, 3> centers = {R * Eigen::Vector3d::UnitX(),
                                            R * Eigen::Vector3d::UnitY(),
                                            R * Eigen::Vector3d::UnitZ()};

  for (int v = 0; v < V; v++) {
    Eigen::Vector3d p = sphere.positions.row(v).transpose();
    double height = 0.0;
    for (int b = 0; b < 3; b++) {
      double ang = std::acos(std::clamp(p.dot(centers[static_cast<size_t>(b)]), -1.0, 1.0));
      height += amps[static_cast<size_t>(b)] *
                std::exp(-0.5 * ang * ang / (sigs[static_cast<size_t>(b)] * sigs[static_cast<size_t>(b)]));
    }
    sphere.positions.row(v) = ((1.0 + height) * p).transpose();
  }

  Shape original = Shape::from_mesh(sphere);
  original.class_label = 0;
  Shape mirrored = Shape::from_mesh(mirror_mesh(sphere));
  mirrored.class_label = 1;
  return {std::move(original), std::move(mirrored)};
}

} // namespace dnet

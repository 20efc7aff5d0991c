#include <doctest.h>

#include "dnet/geometry.h"
#include "dnet/operators.h"
#include "dnet/rng.h"
#include "dnet/shape.h"
#include "dnet/shape_io.h"
#include "dnet/synthetic.h"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

using namespace dnet;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir() {
  fs::path d = fs::temp_directory_path() / "dnet_test_io";
  fs::create_directories(d);
  return d;
}

void write_file(const fs::path& p, const std::string& content) {
  std::ofstream os(p, std::ios::binary);
  os << content;
}

std::vector<double> sorted_edge_lengths(const SurfaceMesh& m) {
  std::vector<double> out;
  for (int f = 0; f < m.n_faces(); f++) {
    for (int c = 0; c < 3; c++) {
      int a = m.faces(f, c), b = m.faces(f, (c + 1) % 3);
      if (a < b) out.push_back((m.positions.row(a) - m.positions.row(b)).norm());
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

} // namespace

TEST_CASE("rng streams are deterministic and uniform draws live in [0,1)") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; i++) {
    double x = a.uniform();
    CHECK(x == b.uniform());
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
  }
  Rng c(43);
  CHECK(Rng(42).uniform() != c.uniform());
}

TEST_CASE("minimal OBJ: 3 vertices, 1 face") {
  auto p = temp_dir() / "tri.obj";
  write_file(p, "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 3\n");
  Shape s = load_shape(p.string());
  REQUIRE(s.is_mesh());
  CHECK(s.mesh.n_vertices() == 3);
  CHECK(s.mesh.n_faces() == 1);
  CHECK(s.mesh.positions(1, 0) == 1.0);
}

TEST_CASE("OBJ quad is fan-triangulated with a warning") {
  auto p = temp_dir() / "quad.obj";
  write_file(p, "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n");
  std::vector<std::string> warnings;
  Shape s = load_shape(p.string(), &warnings);
  REQUIRE(s.mesh.n_faces() == 2);
  CHECK(s.mesh.faces(0, 0) == 0);
  CHECK(s.mesh.faces(0, 1) == 1);
  CHECK(s.mesh.faces(0, 2) == 2);
  CHECK(s.mesh.faces(1, 0) == 0);
  CHECK(s.mesh.faces(1, 1) == 2);
  CHECK(s.mesh.faces(1, 2) == 3);
  CHECK(warnings.size() == 1);
}

TEST_CASE("OBJ errors carry line numbers; polygons beyond quads are rejected") {
  auto p = temp_dir() / "bad.obj";
  write_file(p, "v 0 0 0\nv 1 0 0\nv 0 1 0\nv 0 0 1\nv 1 1 1\nf 1 2 3 4 5\n");
  CHECK_THROWS_WITH_AS(load_shape(p.string()), doctest::Contains(":6:"), ParseError);

  auto q = temp_dir() / "badnum.obj";
  write_file(q, "v 0 0 zero\n");
  CHECK_THROWS_AS(load_shape(q.string()), ParseError);

  auto r = temp_dir() / "badidx.obj";
  write_file(r, "v 0 0 0\nf 1 2 3\n");
  CHECK_THROWS_AS(load_shape(r.string()), ParseError);
}

TEST_CASE("XYZ file of N rows becomes a point cloud, 6 columns add normals") {
  auto p = temp_dir() / "pts.xyz";
  write_file(p, "0 0 0\n1 0 0\n0 1 0\n0 0 1\n");
  Shape s = load_shape(p.string());
  REQUIRE(!s.is_mesh());
  CHECK(s.cloud.n_vertices() == 4);
  CHECK(!s.cloud.normals.has_value());
  CHECK(!s.oriented);

  auto q = temp_dir() / "pts6.xyz";
  write_file(q, "0 0 0 0 0 1\n1 0 0 0 0 1\n");
  Shape t = load_shape(q.string());
  REQUIRE(t.cloud.normals.has_value());
  CHECK(t.oriented);
  CHECK((*t.cloud.normals)(0, 2) == 1.0);
}

TEST_CASE("save/load round-trips positions bit-exactly for obj, ply, xyz") {
  Rng rng(7);
  SurfaceMesh m = make_icosphere(1);
  for (int i = 0; i < m.positions.rows(); i++)
    for (int c = 0; c < 3; c++) m.positions(i, c) *= 1.0 + 0.1 * rng.uniform();
  Shape mesh = Shape::from_mesh(m);

  for (const char* name : {"rt.obj", "rt.ply"}) {
    auto p = temp_dir() / name;
    save_shape(mesh, p.string());
    Shape back = load_shape(p.string());
    REQUIRE(back.is_mesh());
    REQUIRE(back.mesh.positions.rows() == mesh.mesh.positions.rows());
    CHECK((back.mesh.positions - mesh.mesh.positions).cwiseAbs().maxCoeff() == 0.0);
    CHECK((back.mesh.faces - mesh.mesh.faces).cwiseAbs().maxCoeff() == 0);
  }

  Shape cloud = sample_point_cloud(mesh, 50, 3);
  for (const char* name : {"rt.xyz", "rtc.ply"}) {
    auto p = temp_dir() / name;
    save_shape(cloud, p.string());
    Shape back = load_shape(p.string());
    REQUIRE(!back.is_mesh());
    CHECK((back.cloud.positions - cloud.cloud.positions).cwiseAbs().maxCoeff() == 0.0);
    REQUIRE(back.cloud.normals.has_value());
    CHECK((*back.cloud.normals - *cloud.cloud.normals).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("label files round-trip and align with vertex order") {
  Eigen::VectorXi labels(5);
  labels << 0, 2, 1, 2, 0;
  auto p = temp_dir() / "labels.txt";
  save_labels(labels, p.string());
  Eigen::VectorXi back = load_labels(p.string());
  CHECK((back - labels).cwiseAbs().maxCoeff() == 0);
}

TEST_CASE("normalize: two points example") {
  Eigen::MatrixXd P(2, 3);
  P << 0, 0, 0, 2, 0, 0;
  NormalizeTransform t = normalize_positions(P);
  CHECK(t.scale == doctest::Approx(1.0));
  CHECK(t.center(0) == doctest::Approx(1.0));
  CHECK(P(0, 0) == doctest::Approx(-1.0));
  CHECK(P(1, 0) == doctest::Approx(1.0));
}

TEST_CASE("normalize: unit cube corners reach max norm exactly 1; idempotent") {
  Eigen::MatrixXd P(8, 3);
  int r = 0;
  for (int x = 0; x < 2; x++)
    for (int y = 0; y < 2; y++)
      for (int z = 0; z < 2; z++) P.row(r++) << x, y, z;
  normalize_positions(P);
  CHECK(std::abs(P.rowwise().norm().maxCoeff() - 1.0) < 1e-12);
  CHECK(P.colwise().mean().norm() < 1e-12);

  Eigen::MatrixXd Q = P;
  normalize_positions(Q);
  CHECK((Q - P).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("normalize: coincident points is an error") {
  Eigen::MatrixXd P = Eigen::MatrixXd::Ones(4, 3);
  CHECK_THROWS_AS(normalize_positions(P), Error);
}

TEST_CASE("flat_grid(3): V=9, F=8") {
  SurfaceMesh m = make_flat_grid(3);
  CHECK(m.n_vertices() == 9);
  CHECK(m.n_faces() == 8);
  CHECK(total_area(m) == doctest::Approx(1.0));
}

TEST_CASE("icosphere(0): V=12, F=20; icosphere(1): V=42, F=80") {
  SurfaceMesh ico = make_icosphere(0);
  CHECK(ico.n_vertices() == 12);
  CHECK(ico.n_faces() == 20);
  SurfaceMesh s1 = make_icosphere(1);
  CHECK(s1.n_vertices() == 42);
  CHECK(s1.n_faces() == 80);
  for (int i = 0; i < s1.positions.rows(); i++)
    CHECK(s1.positions.row(i).norm() == doctest::Approx(1.0));
}

TEST_CASE("midpoint_refine: single triangle -> V=6, F=4; flat area preserved") {
  SurfaceMesh tri;
  tri.positions.resize(3, 3);
  tri.positions << 0, 0, 0, 1, 0, 0, 0, 1, 0;
  tri.faces.resize(1, 3);
  tri.faces << 0, 1, 2;
  Shape refined = midpoint_refine(Shape::from_mesh(tri));
  CHECK(refined.mesh.n_vertices() == 6);
  CHECK(refined.mesh.n_faces() == 4);
  CHECK(total_area(refined.mesh) == doctest::Approx(total_area(tri)));

  // icosphere(0) -> V + E = 12 + 30, F = 80
  Shape rs = midpoint_refine(Shape::from_mesh(make_icosphere(0)));
  CHECK(rs.mesh.n_vertices() == 42);
  CHECK(rs.mesh.n_faces() == 80);
}

TEST_CASE("sample_point_cloud: single triangle, point inside; determinism") {
  SurfaceMesh tri;
  tri.positions.resize(3, 3);
  tri.positions << 0, 0, 0, 1, 0, 0, 0, 1, 0;
  tri.faces.resize(1, 3);
  tri.faces << 0, 1, 2;
  Shape mesh = Shape::from_mesh(tri);
  mesh.labels = Eigen::VectorXi::Zero(3);
  (*mesh.labels)(1) = 7;

  Shape c1 = sample_point_cloud(mesh, 1, 5, 2);
  Eigen::RowVector3d p = c1.cloud.positions.row(0);
  CHECK(p(0) >= 0.0);
  CHECK(p(1) >= 0.0);
  CHECK(p(0) + p(1) <= 1.0);
  CHECK(p(2) == 0.0);

  Shape c2 = sample_point_cloud(mesh, 1, 5, 2);
  CHECK((c1.cloud.positions - c2.cloud.positions).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("sample_point_cloud: 1e5 samples on the unit square have mean ~ (.5,.5,0)") {
  SurfaceMesh grid = make_flat_grid(4);
  const int n = 100000;
  Shape cloud = sample_point_cloud(Shape::from_mesh(grid), n, 11);
  Eigen::RowVector3d mean = cloud.cloud.positions.colwise().mean();
  // var of U[0,1] is 1/12; 3 sigma of the mean estimate
  double tol = 3.0 * std::sqrt(1.0 / 12.0 / n);
  CHECK(std::abs(mean(0) - 0.5) < tol);
  CHECK(std::abs(mean(1) - 0.5) < tol);
  CHECK(mean(2) == 0.0);
}

TEST_CASE("sampled labels come from a vertex of the source face") {
  BumpySphereParams bp;
  bp.subdivisions = 2;
  Shape sphere = make_bumpy_sphere(bp, 3);
  Shape cloud = sample_point_cloud(sphere, 500, 9);
  REQUIRE(cloud.labels.has_value());
  // every sampled label exists among mesh labels, and background + bumps only
  for (int i = 0; i < cloud.labels->size(); i++) {
    int l = (*cloud.labels)[i];
    CHECK(l >= 0);
    CHECK(l <= bp.n_bumps);
  }
  CHECK(cloud.oriented);
}

TEST_CASE("mirrored pair: isometric (sorted edge lengths match within 1e-12)") {
  auto [orig, mir] = make_mirrored_pair(MirroredPairParams{}, 21);
  auto e1 = sorted_edge_lengths(orig.mesh);
  auto e2 = sorted_edge_lengths(mir.mesh);
  REQUIRE(e1.size() == e2.size());
  for (size_t i = 0; i < e1.size(); i++) CHECK(std::abs(e1[i] - e2[i]) <= 1e-12);
  CHECK(*orig.class_label == 0);
  CHECK(*mir.class_label == 1);
}

TEST_CASE("mirrored pair: identical Laplacians up to relabeling (sorted entries)") {
  auto [orig, mir] = make_mirrored_pair(MirroredPairParams{}, 22);
  SparseReal L1 = build_cotan_laplacian(orig.mesh);
  SparseReal L2 = build_cotan_laplacian(mir.mesh);
  std::vector<double> v1, v2;
  for (int c = 0; c < L1.outerSize(); c++)
    for (SparseReal::InnerIterator it(L1, c); it; ++it) v1.push_back(it.value());
  for (int c = 0; c < L2.outerSize(); c++)
    for (SparseReal::InnerIterator it(L2, c); it; ++it) v2.push_back(it.value());
  std::sort(v1.begin(), v1.end());
  std::sort(v2.begin(), v2.end());
  REQUIRE(v1.size() == v2.size());
  for (size_t i = 0; i < v1.size(); i++) CHECK(std::abs(v1[i] - v2[i]) <= 1e-12);
}

TEST_CASE("mirrored pair keeps outward normals after winding flip") {
  auto [orig, mir] = make_mirrored_pair(MirroredPairParams{}, 23);
  Eigen::MatrixXd n = face_normals(mir.mesh);
  // outward: face normal points away from the origin
  for (int f = 0; f < mir.mesh.n_faces(); f++) {
    Eigen::RowVector3d c = (mir.mesh.positions.row(mir.mesh.faces(f, 0)) +
                            mir.mesh.positions.row(mir.mesh.faces(f, 1)) +
                            mir.mesh.positions.row(mir.mesh.faces(f, 2))) /
                           3.0;
    CHECK(c.dot(n.row(f)) > 0.0);
  }
}

TEST_CASE("bumpy sphere: labels cover background and every bump class") {
  BumpySphereParams bp;
  bp.subdivisions = 3;
  bp.n_bumps = 2;
  Shape s = make_bumpy_sphere(bp, 17);
  REQUIRE(s.labels.has_value());
  std::vector<int> counts(static_cast<size_t>(bp.n_bumps) + 1, 0);
  for (int i = 0; i < s.labels->size(); i++) counts[static_cast<size_t>((*s.labels)[i])]++;
  for (int c = 0; c <= bp.n_bumps; c++) CHECK(counts[static_cast<size_t>(c)] > 0);
}

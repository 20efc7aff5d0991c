#include <doctest.h>

#include "dnet/geometry.h"
#include "dnet/operators.h"
#include "dnet/rng.h"
#include "dnet/spectral.h"
#include "dnet/synthetic.h"

#include <Eigen/Geometry>
#include <cmath>
#include <filesystem>
#include <fstream>

using namespace dnet;
namespace fs = std::filesystem;

namespace {

SurfaceMesh unit_equilateral() {
  SurfaceMesh m;
  m.positions.resize(3, 3);
  m.positions << 0, 0, 0, 1, 0, 0, 0.5, std::sqrt(3.0) / 2.0, 0;
  m.faces.resize(1, 3);
  m.faces << 0, 1, 2;
  return m;
}

Shape noisy_sphere(int subdiv, uint64_t seed) {
  Rng rng(seed);
  SurfaceMesh m = make_icosphere(subdiv);
  for (int i = 0; i < m.positions.rows(); i++)
    m.positions.row(i) *= 1.0 + 0.15 * rng.uniform(-1.0, 1.0);
  return Shape::from_mesh(m);
}

} // namespace

TEST_CASE("cotan Laplacian of the unit equilateral triangle (hand oracle)") {
  // every angle is 60 degrees: off-diagonals -cot(60)/2 = -1/(2 sqrt 3),
  // diagonals twice that magnitude, positive
  SparseReal L = build_cotan_laplacian(unit_equilateral());
  const double off = -1.0 / (2.0 * std::sqrt(3.0));
  for (int i = 0; i < 3; i++) {
    for (int j = 0; j < 3; j++) {
      double expected = i == j ? 1.0 / std::sqrt(3.0) : off;
      CHECK(L.coeff(i, j) == doctest::Approx(expected).epsilon(1e-12));
    }
  }
}

TEST_CASE("mass of the unit equilateral triangle: area/3 per vertex") {
  Eigen::VectorXd M = build_mass_matrix(unit_equilateral());
  const double third = std::sqrt(3.0) / 4.0 / 3.0;
  for (int i = 0; i < 3; i++) CHECK(M[i] == doctest::Approx(third).epsilon(1e-12));
}

TEST_CASE("Laplacian: exact symmetry, kernel contains constants, PSD") {
  Shape s = noisy_sphere(2, 4);
  SparseReal L = build_cotan_laplacian(s.mesh);
  const int V = s.mesh.n_vertices();

  SparseReal diff = SparseReal(L - SparseReal(L.transpose()));
  double asym = 0.0;
  for (int c = 0; c < diff.outerSize(); c++)
    for (SparseReal::InnerIterator it(diff, c); it; ++it) asym = std::max(asym, std::abs(it.value()));
  CHECK(asym == 0.0);

  double maxabs = 0.0;
  for (int c = 0; c < L.outerSize(); c++)
    for (SparseReal::InnerIterator it(L, c); it; ++it) maxabs = std::max(maxabs, std::abs(it.value()));
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(V);
  CHECK((L * ones).cwiseAbs().maxCoeff() <= 1e-12 * maxabs);

  Rng rng(5);
  for (int trial = 0; trial < 100; trial++) {
    Eigen::VectorXd u(V);
    for (int i = 0; i < V; i++) u[i] = rng.uniform(-1.0, 1.0);
    CHECK(u.dot(L * u) >= -1e-10 * u.squaredNorm());
  }
}

TEST_CASE("mass sums to total area; midpoint refinement preserves it (flat)") {
  SurfaceMesh grid = make_flat_grid(6);
  Eigen::VectorXd M = build_mass_matrix(grid);
  CHECK(M.sum() == doctest::Approx(total_area(grid)).epsilon(1e-12));

  Shape refined = midpoint_refine(Shape::from_mesh(grid));
  Eigen::VectorXd M2 = build_mass_matrix(refined.mesh);
  CHECK(M2.sum() == doctest::Approx(M.sum()).epsilon(1e-12));
}

TEST_CASE("degenerate faces are skipped and reported") {
  SurfaceMesh m;
  m.positions.resize(4, 3);
  m.positions << 0, 0, 0, 1, 0, 0, 0, 1, 0, 0.5, 0, 0; // vertex 3 on edge 0-1
  m.faces.resize(2, 3);
  m.faces << 0, 1, 2, 0, 1, 3; // second face has zero area
  OperatorBuildReport rep;
  SparseReal L = build_cotan_laplacian(m, &rep);
  CHECK(rep.degenerate_faces == 1);
  CHECK(L.coeff(3, 3) == 0.0);
}

TEST_CASE("flat grid frames: n=(0,0,1), e1=(1,0,0), e2=(0,1,0)") {
  Shape s = Shape::from_mesh(make_flat_grid(4));
  TangentFrames fr = compute_normals_and_frames(s);
  for (int i = 0; i < s.n_vertices(); i++) {
    CHECK(fr.normals.row(i).isApprox(Eigen::RowVector3d(0, 0, 1), 1e-12));
    CHECK(fr.e1.row(i).isApprox(Eigen::RowVector3d(1, 0, 0), 1e-12));
    CHECK(fr.e2.row(i).isApprox(Eigen::RowVector3d(0, 1, 0), 1e-12));
  }
}

TEST_CASE("icosphere normals are radial within 1e-2; frames orthonormal") {
  Shape s = Shape::from_mesh(make_icosphere(3));
  TangentFrames fr = compute_normals_and_frames(s);
  for (int i = 0; i < s.n_vertices(); i++) {
    Eigen::RowVector3d radial = s.mesh.positions.row(i).normalized();
    CHECK((fr.normals.row(i) - radial).norm() < 1e-2);
  }

  Shape noisy = noisy_sphere(2, 6);
  TangentFrames nf = compute_normals_and_frames(noisy);
  for (int i = 0; i < noisy.n_vertices(); i++) {
    Eigen::Matrix3d B;
    B.row(0) = nf.e1.row(i);
    B.row(1) = nf.e2.row(i);
    B.row(2) = nf.normals.row(i);
    CHECK((B * B.transpose() - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-10);
    // right-handed
    Eigen::Vector3d cross = Eigen::Vector3d(nf.e1.row(i)).cross(Eigen::Vector3d(nf.e2.row(i)));
    CHECK((cross.transpose() - nf.normals.row(i)).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("gradient matrix: exact on linear functions over the flat grid") {
  Shape s = Shape::from_mesh(make_flat_grid(5));
  TangentFrames fr = compute_normals_and_frames(s);
  SparseComplex G = build_gradient_matrix(s, fr);
  const int V = s.n_vertices();

  Eigen::VectorXcd fx = s.mesh.positions.col(0).cast<std::complex<double>>();
  Eigen::VectorXcd gx = G * fx;
  // interior and boundary alike: least squares is exact on linear data
  for (int i = 0; i < V; i++) {
    CHECK(std::abs(gx[i].real() - 1.0) < 1e-10);
    CHECK(std::abs(gx[i].imag()) < 1e-10);
  }

  // f(x,y) = 2x + 3y: gradient = 2 e1 + 3 e2 = 2 + 3i
  Eigen::VectorXcd f = (2.0 * s.mesh.positions.col(0) + 3.0 * s.mesh.positions.col(1))
                           .cast<std::complex<double>>();
  Eigen::VectorXcd g = G * f;
  for (int i = 0; i < V; i++) {
    CHECK(std::abs(g[i].real() - 2.0) < 1e-10);
    CHECK(std::abs(g[i].imag() - 3.0) < 1e-10);
  }
}

TEST_CASE("gradient of a constant is exactly zero (row sums vanish)") {
  Shape s = noisy_sphere(2, 8);
  TangentFrames fr = compute_normals_and_frames(s);
  SparseComplex G = build_gradient_matrix(s, fr);
  Eigen::VectorXcd ones = Eigen::VectorXcd::Ones(s.n_vertices());
  CHECK((G * ones).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("rotating one vertex's frame multiplies its gradient row by e^{-i theta}") {
  Shape s = Shape::from_mesh(make_flat_grid(4));
  TangentFrames fr = compute_normals_and_frames(s);
  SparseComplex G0 = build_gradient_matrix(s, fr);

  const int vtx = 5;
  const double theta = 0.7;
  TangentFrames fr2 = fr;
  Eigen::Vector3d e1 = fr.e1.row(vtx), e2 = fr.e2.row(vtx);
  fr2.e1.row(vtx) = (std::cos(theta) * e1 + std::sin(theta) * e2).transpose();
  fr2.e2.row(vtx) = (-std::sin(theta) * e1 + std::cos(theta) * e2).transpose();
  SparseComplex G1 = build_gradient_matrix(s, fr2);

  Rng rng(10);
  Eigen::VectorXcd f(s.n_vertices());
  for (int i = 0; i < f.size(); i++) f[i] = rng.uniform(-1.0, 1.0);
  std::complex<double> rot(std::cos(theta), -std::sin(theta));
  Eigen::VectorXcd a = G0 * f, b = G1 * f;
  CHECK(std::abs(b[vtx] - rot * a[vtx]) < 1e-10);
  for (int i = 0; i < f.size(); i++)
    if (i != vtx) CHECK(std::abs(b[i] - a[i]) == 0.0);
}

TEST_CASE("rigid motion leaves L and M unchanged; |G f| per vertex unchanged") {
  Shape s = noisy_sphere(2, 12);
  SparseReal L1 = build_cotan_laplacian(s.mesh);
  Eigen::VectorXd M1 = build_mass_matrix(s.mesh);
  TangentFrames f1 = compute_normals_and_frames(s);
  SparseComplex G1 = build_gradient_matrix(s, f1);

  Eigen::Matrix3d R = Eigen::AngleAxisd(0.83, Eigen::Vector3d(1, 2, -1).normalized()).toRotationMatrix();
  Shape r = s;
  r.mesh.positions = (s.mesh.positions * R.transpose()).rowwise() + Eigen::RowVector3d(0.3, -1.2, 2.0);
  SparseReal L2 = build_cotan_laplacian(r.mesh);
  Eigen::VectorXd M2 = build_mass_matrix(r.mesh);
  TangentFrames f2 = compute_normals_and_frames(r);
  SparseComplex G2 = build_gradient_matrix(r, f2);

  SparseReal dL = SparseReal(L1 - L2);
  double dmax = 0.0;
  for (int c = 0; c < dL.outerSize(); c++)
    for (SparseReal::InnerIterator it(dL, c); it; ++it) dmax = std::max(dmax, std::abs(it.value()));
  CHECK(dmax < 1e-10);
  CHECK((M1 - M2).cwiseAbs().maxCoeff() < 1e-10);

  Rng rng(13);
  Eigen::VectorXcd f(s.n_vertices());
  for (int i = 0; i < f.size(); i++) f[i] = rng.uniform(-1.0, 1.0);
  Eigen::VectorXcd a = G1 * f, b = G2 * f;
  for (int i = 0; i < f.size(); i++) CHECK(std::abs(std::abs(a[i]) - std::abs(b[i])) < 1e-8);
}

TEST_CASE("point cloud operators: constants in the kernel, Dirichlet energy oracle") {
  // dense sampling of the unit square
  SurfaceMesh grid = make_flat_grid(8);
  Shape cloud = sample_point_cloud(Shape::from_mesh(grid), 2200, 31);
  cloud.cloud.k_neighbors = 30;

  OperatorBuildReport rep;
  auto [L, M] = build_point_cloud_operators(cloud.cloud, &rep);
  const int V = cloud.n_vertices();

  Eigen::VectorXd ones = Eigen::VectorXd::Ones(V);
  double maxabs = 0.0;
  for (int c = 0; c < L.outerSize(); c++)
    for (SparseReal::InnerIterator it(L, c); it; ++it) maxabs = std::max(maxabs, std::abs(it.value()));
  CHECK((L * ones).cwiseAbs().maxCoeff() <= 1e-12 * maxabs);
  CHECK(M.minCoeff() > 0.0);

  // Dirichlet energy of u = x over the unit square equals its area
  Eigen::VectorXd x = cloud.cloud.positions.col(0);
  double energy = x.dot(L * x);
  CHECK(energy == doctest::Approx(1.0).epsilon(0.10));

  // mass should approximate total area as well
  CHECK(M.sum() == doctest::Approx(1.0).epsilon(0.10));
}

TEST_CASE("point cloud spectrum: lambda_1 of the dense unit square is ~ pi^2") {
  SurfaceMesh grid = make_flat_grid(8);
  Shape cloud = sample_point_cloud(Shape::from_mesh(grid), 1600, 37);
  auto [L, M] = build_point_cloud_operators(cloud.cloud);
  EigenBasis basis = solve_eigenbasis(L, M, 4);
  CHECK(std::abs(basis.eigenvalues[0]) < 1e-6);
  CHECK(basis.eigenvalues[1] == doctest::Approx(M_PI * M_PI).epsilon(0.15));
}

TEST_CASE("operator cache: save -> load -> save is byte-identical; stale caches rejected") {
  Shape s = noisy_sphere(1, 14);
  GeometryOperators ops = compute_operators(s, 16);

  fs::path dir1 = fs::temp_directory_path() / "dnet_cache_a";
  fs::path dir2 = fs::temp_directory_path() / "dnet_cache_b";
  fs::remove_all(dir1);
  fs::remove_all(dir2);
  save_operators(ops, dir1.string());
  GeometryOperators back = load_operators(dir1.string());
  save_operators(back, dir2.string());

  for (const char* name : {"manifest.json", "L.csr", "grad.csr", "mass.f64", "evals.f64",
                           "evecs.f64", "frames.f64", "normals.f64"}) {
    std::ifstream a(dir1 / name, std::ios::binary), b(dir2 / name, std::ios::binary);
    REQUIRE(a);
    REQUIRE(b);
    std::string sa((std::istreambuf_iterator<char>(a)), std::istreambuf_iterator<char>());
    std::string sb((std::istreambuf_iterator<char>(b)), std::istreambuf_iterator<char>());
    CHECK(sa == sb);
  }

  // loaded bundle matches in values
  CHECK((back.basis.eigenvalues - ops.basis.eigenvalues).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.basis.eigenvectors - ops.basis.eigenvectors).cwiseAbs().maxCoeff() == 0.0);
  CHECK((back.mass - ops.mass).cwiseAbs().maxCoeff() == 0.0);

  // stale: wrong k
  CHECK_THROWS_WITH_AS(load_operators_checked(dir1.string(), s, 32, 30),
                       doctest::Contains("stale"), Error);
  // stale: different shape
  Shape other = noisy_sphere(1, 15);
  CHECK_THROWS_WITH_AS(load_operators_checked(dir1.string(), other, 16, 30),
                       doctest::Contains("stale"), Error);
  // matching load succeeds
  GeometryOperators ok = load_operators_checked(dir1.string(), s, 16, 30);
  CHECK(ok.k == 16);

  // corrupt manifest
  {
    std::ofstream os(dir1 / "manifest.json", std::ios::binary);
    os << "{ not json";
  }
  CHECK_THROWS_AS(load_operators(dir1.string()), Error);
}

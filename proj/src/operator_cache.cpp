#include "dnet/operators.h"

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <vector>

namespace dnet {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

constexpr int kSchemaVersion = 1;

void write_blob(const fs::path& path, const void* data, size_t bytes) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write " + path.string());
  os.write(static_cast<const char*>(data), static_cast<std::streamsize>(bytes));
  if (!os) throw Error("short write to " + path.string());
}

std::vector<char> read_blob(const fs::path& path, size_t expected_bytes) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) throw Error("cannot open " + path.string());
  auto size = static_cast<size_t>(in.tellg());
  if (size != expected_bytes)
    throw Error(path.string() + ": expected " + std::to_string(expected_bytes) + " bytes, found " +
                std::to_string(size));
  std::vector<char> buf(size);
  in.seekg(0);
  in.read(buf.data(), static_cast<std::streamsize>(size));
  if (!in) throw Error("short read from " + path.string());
  return buf;
}

struct CsrReal {
  std::vector<int64_t> indptr, indices;
  std::vector<double> values;
};

template <typename Scalar>
void to_csr(const Eigen::SparseMatrix<Scalar>& mat, std::vector<int64_t>& indptr,
            std::vector<int64_t>& indices, std::vector<Scalar>& values) {
  Eigen::SparseMatrix<Scalar, Eigen::RowMajor> rm(mat);
  rm.makeCompressed();
  const int n = static_cast<int>(rm.rows());
  indptr.assign(static_cast<size_t>(n) + 1, 0);
  for (int i = 0; i <= n; i++) indptr[static_cast<size_t>(i)] = rm.outerIndexPtr()[i];
  const auto nnz = static_cast<size_t>(rm.nonZeros());
  indices.resize(nnz);
  values.resize(nnz);
  for (size_t i = 0; i < nnz; i++) {
    indices[i] = rm.innerIndexPtr()[i];
    values[i] = rm.valuePtr()[i];
  }
}

template <typename Scalar>
Eigen::SparseMatrix<Scalar> from_csr(int rows, int cols, const std::vector<int64_t>& indptr,
                                     const std::vector<int64_t>& indices,
                                     const std::vector<Scalar>& values) {
  if (indptr.size() != static_cast<size_t>(rows) + 1)
    throw Error("operator cache: CSR indptr length mismatch");
  std::vector<Eigen::Triplet<Scalar>> trip;
  trip.reserve(values.size());
  for (int i = 0; i < rows; i++) {
    for (int64_t p = indptr[static_cast<size_t>(i)]; p < indptr[static_cast<size_t>(i) + 1]; p++) {
      int64_t j = indices[static_cast<size_t>(p)];
      if (j < 0 || j >= cols) throw Error("operator cache: CSR column index out of range");
      trip.emplace_back(i, static_cast<int>(j), values[static_cast<size_t>(p)]);
    }
  }
  Eigen::SparseMatrix<Scalar> out(rows, cols);
  out.setFromTriplets(trip.begin(), trip.end());
  out.makeCompressed();
  return out;
}

std::string hash_hex(uint64_t h) {
  char buf[19];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

} // namespace

void save_operators(const GeometryOperators& ops, const std::string& dir) {
  fs::create_directories(dir);
  const fs::path d(dir);
  const int V = ops.n_vertices();

  std::vector<int64_t> l_indptr, l_indices;
  std::vector<double> l_values;
  to_csr(ops.laplacian, l_indptr, l_indices, l_values);
  {
    std::ofstream os(d / "L.csr", std::ios::binary);
    if (!os) throw Error("cannot write " + (d / "L.csr").string());
    os.write(reinterpret_cast<const char*>(l_indptr.data()), static_cast<std::streamsize>(l_indptr.size() * 8));
    os.write(reinterpret_cast<const char*>(l_indices.data()), static_cast<std::streamsize>(l_indices.size() * 8));
    os.write(reinterpret_cast<const char*>(l_values.data()), static_cast<std::streamsize>(l_values.size() * 8));
  }

  std::vector<int64_t> g_indptr, g_indices;
  std::vector<std::complex<double>> g_values;
  to_csr(ops.gradient, g_indptr, g_indices, g_values);
  {
    std::ofstream os(d / "grad.csr", std::ios::binary);
    if (!os) throw Error("cannot write " + (d / "grad.csr").string());
    os.write(reinterpret_cast<const char*>(g_indptr.data()), static_cast<std::streamsize>(g_indptr.size() * 8));
    os.write(reinterpret_cast<const char*>(g_indices.data()), static_cast<std::streamsize>(g_indices.size() * 8));
    // complex values as interleaved (re, im) float64 pairs
    os.write(reinterpret_cast<const char*>(g_values.data()), static_cast<std::streamsize>(g_values.size() * 16));
  }

  write_blob(d / "mass.f64", ops.mass.data(), static_cast<size_t>(V) * 8);
  write_blob(d / "evals.f64", ops.basis.eigenvalues.data(), static_cast<size_t>(ops.k) * 8);
  {
    // row-major V x k
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = ops.basis.eigenvectors;
    write_blob(d / "evecs.f64", rm.data(), static_cast<size_t>(V) * static_cast<size_t>(ops.k) * 8);
  }
  {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> fr(V, 9);
    fr << ops.frames.e1, ops.frames.e2, ops.frames.normals;
    write_blob(d / "frames.f64", fr.data(), static_cast<size_t>(V) * 9 * 8);
  }
  {
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> nm = ops.frames.normals;
    write_blob(d / "normals.f64", nm.data(), static_cast<size_t>(V) * 3 * 8);
  }

  json arrays = {
      {"L.csr", {{"dtype", "csr_f64"}, {"rows", V}, {"cols", V}, {"nnz", static_cast<int64_t>(l_values.size())}}},
      {"grad.csr", {{"dtype", "csr_c128"}, {"rows", V}, {"cols", V}, {"nnz", static_cast<int64_t>(g_values.size())}}},
      {"mass.f64", {{"dtype", "f64"}, {"rows", V}, {"cols", 1}}},
      {"evals.f64", {{"dtype", "f64"}, {"rows", ops.k}, {"cols", 1}}},
      {"evecs.f64", {{"dtype", "f64"}, {"rows", V}, {"cols", ops.k}}},
      {"frames.f64", {{"dtype", "f64"}, {"rows", V}, {"cols", 9}}},
      {"normals.f64", {{"dtype", "f64"}, {"rows", V}, {"cols", 3}}},
  };
  json manifest = {
      {"schema_version", kSchemaVersion},
      {"shape_hash", hash_hex(ops.shape_hash)},
      {"V", V},
      {"F", ops.n_faces},
      {"k", ops.k},
      {"k_neighbors", ops.k_neighbors},
      {"oriented", ops.oriented},
      {"arrays", arrays},
      {"report",
       {{"degenerate_faces", ops.report.degenerate_faces},
        {"clamped_cotans", ops.report.clamped_cotans},
        {"isolated_vertices", ops.report.isolated_vertices},
        {"fallback_points", ops.report.fallback_points},
        {"regularized_rows", ops.report.regularized_rows}}},
  };
  std::ofstream os(d / "manifest.json", std::ios::binary);
  if (!os) throw Error("cannot write " + (d / "manifest.json").string());
  os << manifest.dump(2) << "\n";
}

GeometryOperators load_operators(const std::string& dir) {
  const fs::path d(dir);
  std::ifstream in(d / "manifest.json");
  if (!in) throw Error("operator cache: cannot open " + (d / "manifest.json").string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw Error("operator cache: corrupt manifest: " + std::string(e.what()));
  }

  if (!manifest.contains("schema_version") || manifest["schema_version"].get<int>() != kSchemaVersion)
    throw Error("operator cache: schema version mismatch in " + dir);

  GeometryOperators ops;
  const int V = manifest.at("V").get<int>();
  ops.k = manifest.at("k").get<int>();
  ops.n_faces = manifest.value("F", 0);
  ops.k_neighbors = manifest.at("k_neighbors").get<int>();
  ops.oriented = manifest.at("oriented").get<bool>();
  ops.shape_hash = std::stoull(manifest.at("shape_hash").get<std::string>(), nullptr, 16);
  if (manifest.contains("report")) {
    const json& r = manifest["report"];
    ops.report.degenerate_faces = r.value("degenerate_faces", 0);
    ops.report.clamped_cotans = r.value("clamped_cotans", 0);
    ops.report.isolated_vertices = r.value("isolated_vertices", 0);
    ops.report.fallback_points = r.value("fallback_points", 0);
    ops.report.regularized_rows = r.value("regularized_rows", 0);
  }

  const json& arrays = manifest.at("arrays");

  {
    auto nnz = arrays.at("L.csr").at("nnz").get<int64_t>();
    size_t bytes = (static_cast<size_t>(V) + 1 + static_cast<size_t>(nnz)) * 8 + static_cast<size_t>(nnz) * 8;
    auto buf = read_blob(d / "L.csr", bytes);
    std::vector<int64_t> indptr(static_cast<size_t>(V) + 1), indices(static_cast<size_t>(nnz));
    std::vector<double> values(static_cast<size_t>(nnz));
    const char* p = buf.data();
    std::memcpy(indptr.data(), p, indptr.size() * 8);
    p += indptr.size() * 8;
    std::memcpy(indices.data(), p, indices.size() * 8);
    p += indices.size() * 8;
    std::memcpy(values.data(), p, values.size() * 8);
    ops.laplacian = from_csr<double>(V, V, indptr, indices, values);
  }
  {
    auto nnz = arrays.at("grad.csr").at("nnz").get<int64_t>();
    size_t bytes = (static_cast<size_t>(V) + 1 + static_cast<size_t>(nnz)) * 8 + static_cast<size_t>(nnz) * 16;
    auto buf = read_blob(d / "grad.csr", bytes);
    std::vector<int64_t> indptr(static_cast<size_t>(V) + 1), indices(static_cast<size_t>(nnz));
    std::vector<std::complex<double>> values(static_cast<size_t>(nnz));
    const char* p = buf.data();
    std::memcpy(indptr.data(), p, indptr.size() * 8);
    p += indptr.size() * 8;
    std::memcpy(indices.data(), p, indices.size() * 8);
    p += indices.size() * 8;
    std::memcpy(values.data(), p, values.size() * 16);
    ops.gradient = from_csr<std::complex<double>>(V, V, indptr, indices, values);
  }

  {
    auto buf = read_blob(d / "mass.f64", static_cast<size_t>(V) * 8);
    ops.mass.resize(V);
    std::memcpy(ops.mass.data(), buf.data(), buf.size());
  }
  {
    auto buf = read_blob(d / "evals.f64", static_cast<size_t>(ops.k) * 8);
    ops.basis.eigenvalues.resize(ops.k);
    std::memcpy(ops.basis.eigenvalues.data(), buf.data(), buf.size());
  }
  {
    auto buf = read_blob(d / "evecs.f64", static_cast<size_t>(V) * static_cast<size_t>(ops.k) * 8);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm(V, ops.k);
    std::memcpy(rm.data(), buf.data(), buf.size());
    ops.basis.eigenvectors = rm;
    ops.basis.k = ops.k;
  }
  {
    auto buf = read_blob(d / "frames.f64", static_cast<size_t>(V) * 9 * 8);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> fr(V, 9);
    std::memcpy(fr.data(), buf.data(), buf.size());
    ops.frames.e1 = fr.leftCols(3);
    ops.frames.e2 = fr.middleCols(3, 3);
    ops.frames.normals = fr.rightCols(3);
  }
  {
    auto buf = read_blob(d / "normals.f64", static_cast<size_t>(V) * 3 * 8);
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> nm(V, 3);
    std::memcpy(nm.data(), buf.data(), buf.size());
    if ((nm - ops.frames.normals).cwiseAbs().maxCoeff() > 0)
      throw Error("operator cache: frames.f64 and normals.f64 disagree");
  }

  if (ops.basis.eigenvectors.rows() != V || ops.mass.size() != V)
    throw Error("operator cache: dimension mismatch");
  return ops;
}

GeometryOperators load_operators_checked(const std::string& dir, const Shape& shape, int k,
                                         int k_neighbors) {
  GeometryOperators ops = load_operators(dir);
  Shape tmp = shape;
  if (!tmp.is_mesh()) tmp.cloud.k_neighbors = k_neighbors;
  uint64_t expect = shape_content_hash(tmp);
  if (ops.shape_hash != expect)
    throw Error("operator cache: stale cache in " + dir + " (shape hash mismatch: cache " +
                hash_hex(ops.shape_hash) + ", shape " + hash_hex(expect) + ")");
  if (ops.k != k)
    throw Error("operator cache: stale cache in " + dir + " (k mismatch: cache " +
                std::to_string(ops.k) + ", requested " + std::to_string(k) + ")");
  if (!shape.is_mesh() && ops.k_neighbors != k_neighbors)
    throw Error("operator cache: stale cache in " + dir + " (k_neighbors mismatch: cache " +
                std::to_string(ops.k_neighbors) + ", requested " + std::to_string(k_neighbors) +
                ")");
  if (ops.oriented != shape.oriented)
    throw Error("operator cache: stale cache in " + dir + " (orientation flag mismatch)");
  return ops;
}

} // namespace dnet

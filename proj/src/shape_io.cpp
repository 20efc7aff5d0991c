#include "dnet/shape_io.h"

#include <algorithm>
#include <array>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace dnet {

namespace {

std::string lower_ext(const std::string& path) {
  auto dot = path.find_last_of('.');
  if (dot == std::string::npos) return "";
  std::string ext = path.substr(dot + 1);
  std::transform(ext.begin(), ext.end(), ext.begin(),
                 [](unsigned char c) { return std::tolower(c); });
  return ext;
}

std::vector<std::string> split_ws(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream is(s);
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

double parse_double(const std::string& tok, const std::string& path, int line) {
  try {
    size_t used = 0;
    double v = std::stod(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ParseError(path, line, "expected a number, got '" + tok + "'");
  }
}

long parse_long(const std::string& tok, const std::string& path, int line) {
  try {
    size_t used = 0;
    long v = std::stol(tok, &used);
    if (used != tok.size()) throw std::invalid_argument(tok);
    return v;
  } catch (const std::exception&) {
    throw ParseError(path, line, "expected an integer, got '" + tok + "'");
  }
}

void fmt_double(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  out += buf;
}

void push_warning(std::vector<std::string>* warnings, const std::string& msg) {
  if (warnings) warnings->push_back(msg);
}

// ---------------------------------------------------------------------------
// OBJ

Shape load_obj(const std::string& path, std::vector<std::string>* warnings) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open file: " + path);

  std::vector<Eigen::RowVector3d> verts;
  std::vector<Eigen::RowVector3i> faces;
  int quad_count = 0;

  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    lineno++;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto toks = split_ws(line);
    if (toks.empty() || toks[0][0] == '#') continue;
    const std::string& key = toks[0];

    if (key == "v") {
      if (toks.size() < 4) throw ParseError(path, lineno, "vertex needs 3 coordinates");
      verts.emplace_back(parse_double(toks[1], path, lineno), parse_double(toks[2], path, lineno),
                         parse_double(toks[3], path, lineno));
    } else if (key == "f") {
      std::vector<int> idx;
      for (size_t i = 1; i < toks.size(); i++) {
        std::string ref = toks[i];
        auto slash = ref.find('/');
        if (slash != std::string::npos) ref = ref.substr(0, slash);
        long v = parse_long(ref, path, lineno);
        if (v < 0) v = static_cast<long>(verts.size()) + 1 + v; // relative index
        if (v < 1 || v > static_cast<long>(verts.size()))
          throw ParseError(path, lineno, "face index " + std::to_string(v) + " out of range");
        idx.push_back(static_cast<int>(v - 1));
      }
      if (idx.size() < 3) throw ParseError(path, lineno, "face needs at least 3 vertices");
      if (idx.size() > 4)
        throw ParseError(path, lineno,
                         "unsupported " + std::to_string(idx.size()) +
                             "-gon (only triangles and quads are accepted)");
      faces.emplace_back(idx[0], idx[1], idx[2]);
      if (idx.size() == 4) {
        faces.emplace_back(idx[0], idx[2], idx[3]);
        quad_count++;
      }
    }
    // vn / vt / usemtl / o / g / s / mtllib are ignored
  }
  if (verts.empty()) throw Error(path + ": no vertices found");
  if (quad_count > 0)
    push_warning(warnings, path + ": fan-triangulated " + std::to_string(quad_count) + " quad(s)");

  SurfaceMesh mesh;
  mesh.positions.resize(static_cast<int>(verts.size()), 3);
  for (size_t i = 0; i < verts.size(); i++) mesh.positions.row(static_cast<int>(i)) = verts[i];
  mesh.faces.resize(static_cast<int>(faces.size()), 3);
  for (size_t i = 0; i < faces.size(); i++) mesh.faces.row(static_cast<int>(i)) = faces[i];
  return Shape::from_mesh(std::move(mesh));
}

void save_obj(const Shape& shape, const std::string& path) {
  if (!shape.is_mesh()) throw Error("save_shape: OBJ output requires a mesh");
  std::string out;
  const Eigen::MatrixXd& P = shape.mesh.positions;
  const Eigen::MatrixXi& F = shape.mesh.faces;
  for (int i = 0; i < P.rows(); i++) {
    out += "v ";
    fmt_double(out, P(i, 0));
    out += ' ';
    fmt_double(out, P(i, 1));
    out += ' ';
    fmt_double(out, P(i, 2));
    out += '\n';
  }
  for (int f = 0; f < F.rows(); f++) {
    out += "f " + std::to_string(F(f, 0) + 1) + " " + std::to_string(F(f, 1) + 1) + " " +
           std::to_string(F(f, 2) + 1) + "\n";
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write file: " + path);
  os << out;
}

// ---------------------------------------------------------------------------
// PLY

struct PlyProperty {
  std::string name;
  std::string type;      // scalar type, or list element type
  std::string count_type; // non-empty for list properties
};

struct PlyElement {
  std::string name;
  long count = 0;
  std::vector<PlyProperty> props;
};

size_t ply_type_size(const std::string& t, const std::string& path, int line) {
  if (t == "char" || t == "uchar" || t == "int8" || t == "uint8") return 1;
  if (t == "short" || t == "ushort" || t == "int16" || t == "uint16") return 2;
  if (t == "int" || t == "uint" || t == "int32" || t == "uint32" || t == "float" ||
      t == "float32")
    return 4;
  if (t == "double" || t == "float64" || t == "int64" || t == "uint64") return 8;
  throw ParseError(path, line, "unknown PLY type '" + t + "'");
}

double ply_read_binary_scalar(std::istream& in, const std::string& type) {
  unsigned char buf[8];
  size_t n = ply_type_size(type, "", 0);
  in.read(reinterpret_cast<char*>(buf), static_cast<std::streamsize>(n));
  // little-endian host assumed (x86/ARM); bytes are in file order
  if (type == "char" || type == "int8") return static_cast<double>(*reinterpret_cast<int8_t*>(buf));
  if (type == "uchar" || type == "uint8") return static_cast<double>(buf[0]);
  if (type == "short" || type == "int16") {
    int16_t v;
    std::memcpy(&v, buf, 2);
    return v;
  }
  if (type == "ushort" || type == "uint16") {
    uint16_t v;
    std::memcpy(&v, buf, 2);
    return v;
  }
  if (type == "int" || type == "int32") {
    int32_t v;
    std::memcpy(&v, buf, 4);
    return v;
  }
  if (type == "uint" || type == "uint32") {
    uint32_t v;
    std::memcpy(&v, buf, 4);
    return v;
  }
  if (type == "float" || type == "float32") {
    float v;
    std::memcpy(&v, buf, 4);
    return v;
  }
  double v;
  std::memcpy(&v, buf, 8);
  return v;
}

Shape load_ply(const std::string& path, std::vector<std::string>* warnings) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open file: " + path);

  std::string line;
  int lineno = 0;
  auto next_line = [&]() -> std::string {
    if (!std::getline(in, line)) throw ParseError(path, lineno, "unexpected end of header");
    lineno++;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };

  if (next_line() != "ply") throw ParseError(path, lineno, "missing 'ply' magic");
  bool binary = false;
  std::vector<PlyElement> elements;
  while (true) {
    auto toks = split_ws(next_line());
    if (toks.empty()) continue;
    if (toks[0] == "comment" || toks[0] == "obj_info") continue;
    if (toks[0] == "format") {
      if (toks.size() < 2) throw ParseError(path, lineno, "malformed format line");
      if (toks[1] == "ascii")
        binary = false;
      else if (toks[1] == "binary_little_endian")
        binary = true;
      else
        throw ParseError(path, lineno, "unsupported PLY format '" + toks[1] + "'");
    } else if (toks[0] == "element") {
      if (toks.size() != 3) throw ParseError(path, lineno, "malformed element line");
      PlyElement e;
      e.name = toks[1];
      e.count = parse_long(toks[2], path, lineno);
      elements.push_back(e);
    } else if (toks[0] == "property") {
      if (elements.empty()) throw ParseError(path, lineno, "property before element");
      PlyProperty p;
      if (toks.size() == 5 && toks[1] == "list") {
        p.count_type = toks[2];
        p.type = toks[3];
        p.name = toks[4];
      } else if (toks.size() == 3) {
        p.type = toks[1];
        p.name = toks[2];
      } else {
        throw ParseError(path, lineno, "malformed property line");
      }
      ply_type_size(p.type, path, lineno);
      elements.back().props.push_back(p);
    } else if (toks[0] == "end_header") {
      break;
    } else {
      throw ParseError(path, lineno, "unknown header keyword '" + toks[0] + "'");
    }
  }

  Eigen::MatrixXd positions, normals;
  bool has_normals = false;
  std::vector<Eigen::RowVector3i> faces;
  int quad_count = 0;

  std::vector<std::string> ascii_toks;
  size_t ascii_pos = 0;
  auto ascii_next = [&]() -> const std::string& {
    while (ascii_pos >= ascii_toks.size()) {
      auto l = next_line();
      ascii_toks = split_ws(l);
      ascii_pos = 0;
    }
    return ascii_toks[ascii_pos++];
  };
  auto read_scalar = [&](const std::string& type) -> double {
    if (binary) return ply_read_binary_scalar(in, type);
    return parse_double(ascii_next(), path, lineno);
  };

  for (const PlyElement& e : elements) {
    if (e.name == "vertex") {
      int ix = -1, iy = -1, iz = -1, inx = -1, iny = -1, inz = -1;
      for (size_t p = 0; p < e.props.size(); p++) {
        const std::string& n = e.props[p].name;
        if (n == "x") ix = static_cast<int>(p);
        if (n == "y") iy = static_cast<int>(p);
        if (n == "z") iz = static_cast<int>(p);
        if (n == "nx") inx = static_cast<int>(p);
        if (n == "ny") iny = static_cast<int>(p);
        if (n == "nz") inz = static_cast<int>(p);
      }
      if (ix < 0 || iy < 0 || iz < 0)
        throw ParseError(path, lineno, "vertex element lacks x/y/z properties");
      has_normals = inx >= 0 && iny >= 0 && inz >= 0;
      positions.resize(e.count, 3);
      if (has_normals) normals.resize(e.count, 3);
      std::vector<double> vals(e.props.size());
      for (long i = 0; i < e.count; i++) {
        for (size_t p = 0; p < e.props.size(); p++) {
          if (!e.props[p].count_type.empty())
            throw ParseError(path, lineno, "list property on vertex element is unsupported");
          vals[p] = read_scalar(e.props[p].type);
        }
        positions.row(i) << vals[ix], vals[iy], vals[iz];
        if (has_normals) normals.row(i) << vals[inx], vals[iny], vals[inz];
      }
    } else if (e.name == "face") {
      for (long i = 0; i < e.count; i++) {
        for (const PlyProperty& p : e.props) {
          if (p.count_type.empty()) {
            read_scalar(p.type);
            continue;
          }
          long n = static_cast<long>(read_scalar(p.count_type));
          std::vector<int> idx(static_cast<size_t>(n));
          for (long j = 0; j < n; j++) idx[static_cast<size_t>(j)] = static_cast<int>(read_scalar(p.type));
          if (p.name != "vertex_indices" && p.name != "vertex_index") continue;
          if (n < 3 || n > 4)
            throw ParseError(path, lineno,
                             "unsupported " + std::to_string(n) + "-gon in PLY face element");
          for (int v : idx)
            if (v < 0 || v >= positions.rows())
              throw ParseError(path, lineno, "face index out of range");
          faces.emplace_back(idx[0], idx[1], idx[2]);
          if (n == 4) {
            faces.emplace_back(idx[0], idx[2], idx[3]);
            quad_count++;
          }
        }
      }
    } else {
      // skip unknown element
      for (long i = 0; i < e.count; i++) {
        for (const PlyProperty& p : e.props) {
          if (p.count_type.empty()) {
            read_scalar(p.type);
          } else {
            long n = static_cast<long>(read_scalar(p.count_type));
            for (long j = 0; j < n; j++) read_scalar(p.type);
          }
        }
      }
    }
  }
  if (positions.rows() == 0) throw Error(path + ": PLY file has no vertices");
  if (quad_count > 0)
    push_warning(warnings, path + ": fan-triangulated " + std::to_string(quad_count) + " quad(s)");

  if (!faces.empty()) {
    SurfaceMesh mesh;
    mesh.positions = std::move(positions);
    mesh.faces.resize(static_cast<int>(faces.size()), 3);
    for (size_t i = 0; i < faces.size(); i++) mesh.faces.row(static_cast<int>(i)) = faces[i];
    return Shape::from_mesh(std::move(mesh));
  }
  PointCloud cloud;
  cloud.positions = std::move(positions);
  if (has_normals) {
    for (int i = 0; i < normals.rows(); i++) {
      double n = normals.row(i).norm();
      if (n > 0) normals.row(i) /= n;
    }
    cloud.normals = std::move(normals);
  }
  return Shape::from_cloud(std::move(cloud));
}

void save_ply(const Shape& shape, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write file: " + path);
  const Eigen::MatrixXd& P = shape.positions();
  const bool has_normals = !shape.is_mesh() && shape.cloud.normals.has_value();

  os << "ply\nformat binary_little_endian 1.0\n";
  os << "element vertex " << P.rows() << "\n";
  os << "property double x\nproperty double y\nproperty double z\n";
  if (has_normals) os << "property double nx\nproperty double ny\nproperty double nz\n";
  if (shape.is_mesh()) {
    os << "element face " << shape.mesh.faces.rows() << "\n";
    os << "property list uchar int vertex_indices\n";
  }
  os << "end_header\n";

  auto write_d = [&](double v) { os.write(reinterpret_cast<const char*>(&v), 8); };
  for (int i = 0; i < P.rows(); i++) {
    write_d(P(i, 0));
    write_d(P(i, 1));
    write_d(P(i, 2));
    if (has_normals) {
      write_d((*shape.cloud.normals)(i, 0));
      write_d((*shape.cloud.normals)(i, 1));
      write_d((*shape.cloud.normals)(i, 2));
    }
  }
  if (shape.is_mesh()) {
    const Eigen::MatrixXi& F = shape.mesh.faces;
    for (int f = 0; f < F.rows(); f++) {
      unsigned char n = 3;
      os.write(reinterpret_cast<const char*>(&n), 1);
      for (int c = 0; c < 3; c++) {
        int32_t v = F(f, c);
        os.write(reinterpret_cast<const char*>(&v), 4);
      }
    }
  }
}

// ---------------------------------------------------------------------------
// XYZ

Shape load_xyz(const std::string& path, std::vector<std::string>*) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open file: " + path);
  std::vector<std::array<double, 6>> rows;
  int cols = -1;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    lineno++;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto toks = split_ws(line);
    if (toks.empty() || toks[0][0] == '#') continue;
    if (toks.size() != 3 && toks.size() != 6)
      throw ParseError(path, lineno,
                       "expected 3 or 6 columns, got " + std::to_string(toks.size()));
    if (cols < 0) cols = static_cast<int>(toks.size());
    if (static_cast<int>(toks.size()) != cols)
      throw ParseError(path, lineno, "inconsistent column count");
    std::array<double, 6> r{};
    for (size_t i = 0; i < toks.size(); i++) r[i] = parse_double(toks[i], path, lineno);
    rows.push_back(r);
  }
  if (rows.empty()) throw Error(path + ": no points found");

  PointCloud cloud;
  cloud.positions.resize(static_cast<int>(rows.size()), 3);
  for (size_t i = 0; i < rows.size(); i++)
    cloud.positions.row(static_cast<int>(i)) << rows[i][0], rows[i][1], rows[i][2];
  if (cols == 6) {
    Eigen::MatrixXd N(static_cast<int>(rows.size()), 3);
    for (size_t i = 0; i < rows.size(); i++) {
      Eigen::RowVector3d n(rows[i][3], rows[i][4], rows[i][5]);
      double len = n.norm();
      N.row(static_cast<int>(i)) = len > 0 ? (n / len).eval() : n;
    }
    cloud.normals = std::move(N);
  }
  return Shape::from_cloud(std::move(cloud));
}

void save_xyz(const Shape& shape, const std::string& path) {
  std::string out;
  const Eigen::MatrixXd& P = shape.positions();
  const Eigen::MatrixXd* N =
      (!shape.is_mesh() && shape.cloud.normals) ? &*shape.cloud.normals : nullptr;
  for (int i = 0; i < P.rows(); i++) {
    fmt_double(out, P(i, 0));
    out += ' ';
    fmt_double(out, P(i, 1));
    out += ' ';
    fmt_double(out, P(i, 2));
    if (N) {
      for (int c = 0; c < 3; c++) {
        out += ' ';
        fmt_double(out, (*N)(i, c));
      }
    }
    out += '\n';
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write file: " + path);
  os << out;
}

} // namespace

ShapeFormat format_from_path(const std::string& path) {
  std::string ext = lower_ext(path);
  if (ext == "obj") return ShapeFormat::Obj;
  if (ext == "ply") return ShapeFormat::Ply;
  if (ext == "xyz") return ShapeFormat::Xyz;
  throw Error("cannot infer shape format from extension of '" + path + "'");
}

Shape load_shape(const std::string& path, ShapeFormat format,
                 std::vector<std::string>* warnings) {
  Shape s;
  switch (format) {
  case ShapeFormat::Obj: s = load_obj(path, warnings); break;
  case ShapeFormat::Ply: s = load_ply(path, warnings); break;
  case ShapeFormat::Xyz: s = load_xyz(path, warnings); break;
  }
  validate_shape(s);
  return s;
}

Shape load_shape(const std::string& path, std::vector<std::string>* warnings) {
  return load_shape(path, format_from_path(path), warnings);
}

void save_shape(const Shape& shape, const std::string& path, ShapeFormat format) {
  switch (format) {
  case ShapeFormat::Obj: save_obj(shape, path); break;
  case ShapeFormat::Ply: save_ply(shape, path); break;
  case ShapeFormat::Xyz: save_xyz(shape, path); break;
  }
}

void save_shape(const Shape& shape, const std::string& path) {
  save_shape(shape, path, format_from_path(path));
}

Eigen::VectorXi load_labels(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open file: " + path);
  std::vector<int> vals;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    lineno++;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    auto toks = split_ws(line);
    if (toks.empty()) continue;
    if (toks.size() != 1) throw ParseError(path, lineno, "expected one integer per line");
    vals.push_back(static_cast<int>(parse_long(toks[0], path, lineno)));
  }
  Eigen::VectorXi out(static_cast<int>(vals.size()));
  for (size_t i = 0; i < vals.size(); i++) out[static_cast<int>(i)] = vals[i];
  return out;
}

void save_labels(const Eigen::VectorXi& labels, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot write file: " + path);
  for (int i = 0; i < labels.size(); i++) os << labels[i] << "\n";
}

} // namespace dnet

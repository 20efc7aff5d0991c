#pragma once

#include "dnet/shape.h"

#include <string>
#include <vector>

namespace dnet {

class ParseError : public Error {
public:
  ParseError(const std::string& path, int line, const std::string& what)
      : Error(path + ":" + std::to_string(line) + ": " + what) {}
};

enum class ShapeFormat { Obj, Ply, Xyz };

// Infer from the file extension; throws on unknown extensions.
ShapeFormat format_from_path(const std::string& path);

// Load a shape from disk. OBJ and PLY produce meshes (PLY with no faces
// produces a point cloud), XYZ produces a point cloud (3 columns, or 6 with
// normals). Vertex order is preserved from the file. Quads are
// fan-triangulated with a warning pushed to `warnings`; other polygons are
// rejected.
Shape load_shape(const std::string& path, ShapeFormat format,
                 std::vector<std::string>* warnings = nullptr);
Shape load_shape(const std::string& path, std::vector<std::string>* warnings = nullptr);

// Write a shape. OBJ and XYZ are ASCII with 17 significant digits so that
// load(save(x)) reproduces every coordinate bit-exactly; PLY is written as
// binary little-endian with double precision.
void save_shape(const Shape& shape, const std::string& path, ShapeFormat format);
void save_shape(const Shape& shape, const std::string& path);

// Label files: one integer per line, aligned with vertex order.
Eigen::VectorXi load_labels(const std::string& path);
void save_labels(const Eigen::VectorXi& labels, const std::string& path);

} // namespace dnet

#include "dnet/delaunay.h"

#include "dnet/shape.h"

#include <algorithm>
#include <cmath>
#include <map>

namespace dnet {

namespace {

struct Tri {
  int a, b, c;
  bool alive = true;
};

double orient2d(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c) {
  return (b.x() - a.x()) * (c.y() - a.y()) - (b.y() - a.y()) * (c.x() - a.x());
}

// > 0 when p is strictly inside the circumcircle of ccw triangle (a, b, c).
double incircle(const Eigen::Vector2d& a, const Eigen::Vector2d& b, const Eigen::Vector2d& c,
                const Eigen::Vector2d& p) {
  Eigen::Vector2d da = a - p, db = b - p, dc = c - p;
  double det = (da.squaredNorm()) * orient2d(p, b, c) - (db.squaredNorm()) * orient2d(p, a, c) +
               (dc.squaredNorm()) * orient2d(p, a, b);
  return det;
}

} // namespace

std::vector<std::array<int, 3>> delaunay_2d(const std::vector<Eigen::Vector2d>& input) {
  const int n = static_cast<int>(input.size());
  if (n < 3) throw Error("delaunay_2d: need at least 3 points");

  // Normalize scale for predicate conditioning.
  Eigen::Vector2d lo = input[0], hi = input[0];
  for (const auto& p : input) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  double span = std::max((hi - lo).maxCoeff(), 1e-300);
  Eigen::Vector2d mid = 0.5 * (lo + hi);

  std::vector<Eigen::Vector2d> pts(static_cast<size_t>(n + 3));
  for (int i = 0; i < n; i++) pts[static_cast<size_t>(i)] = (input[static_cast<size_t>(i)] - mid) / span;

  bool degenerate = true;
  for (int i = 2; i < n && degenerate; i++)
    if (std::abs(orient2d(pts[0], pts[1], pts[static_cast<size_t>(i)])) > 1e-12) degenerate = false;
  if (degenerate) throw Error("delaunay_2d: points are collinear");

  // Super-triangle enclosing the normalized set.
  pts[static_cast<size_t>(n)] = Eigen::Vector2d(-40.0, -40.0);
  pts[static_cast<size_t>(n + 1)] = Eigen::Vector2d(40.0, -40.0);
  pts[static_cast<size_t>(n + 2)] = Eigen::Vector2d(0.0, 60.0);

  std::vector<Tri> tris;
  tris.push_back({n, n + 1, n + 2});

  for (int i = 0; i < n; i++) {
    const Eigen::Vector2d& p = pts[static_cast<size_t>(i)];

    // Cavity: all triangles whose circumcircle contains p.
    std::map<std::pair<int, int>, int> edge_count;
    bool found = false;
    for (auto& t : tris) {
      if (!t.alive) continue;
      if (incircle(pts[static_cast<size_t>(t.a)], pts[static_cast<size_t>(t.b)], pts[static_cast<size_t>(t.c)], p) > 0) {
        t.alive = false;
        found = true;
        auto add_edge = [&](int u, int v) {
          auto key = std::minmax(u, v);
          edge_count[key]++;
        };
        add_edge(t.a, t.b);
        add_edge(t.b, t.c);
        add_edge(t.c, t.a);
      }
    }
    if (!found) {
      // p is on/outside every circumcircle (cocircular tie at boundary);
      // claim the containing triangle instead.
      for (auto& t : tris) {
        if (!t.alive) continue;
        double s1 = orient2d(pts[static_cast<size_t>(t.a)], pts[static_cast<size_t>(t.b)], p);
        double s2 = orient2d(pts[static_cast<size_t>(t.b)], pts[static_cast<size_t>(t.c)], p);
        double s3 = orient2d(pts[static_cast<size_t>(t.c)], pts[static_cast<size_t>(t.a)], p);
        if (s1 >= -1e-14 && s2 >= -1e-14 && s3 >= -1e-14) {
          t.alive = false;
          edge_count[std::minmax(t.a, t.b)]++;
          edge_count[std::minmax(t.b, t.c)]++;
          edge_count[std::minmax(t.c, t.a)]++;
          found = true;
          break;
        }
      }
      if (!found) throw Error("delaunay_2d: insertion failed (degenerate configuration)");
    }

    // Re-triangulate the cavity boundary (edges seen exactly once).
    for (const auto& [edge, count] : edge_count) {
      if (count != 1) continue;
      int u = edge.first, v = edge.second;
      double o = orient2d(pts[static_cast<size_t>(u)], pts[static_cast<size_t>(v)], p);
      if (std::abs(o) < 1e-16) continue;
      if (o > 0)
        tris.push_back({u, v, i});
      else
        tris.push_back({v, u, i});
    }
  }

  std::vector<std::array<int, 3>> out;
  for (const auto& t : tris) {
    if (!t.alive) continue;
    if (t.a >= n || t.b >= n || t.c >= n) continue;
    out.push_back({t.a, t.b, t.c});
  }
  if (out.empty()) throw Error("delaunay_2d: empty triangulation");
  return out;
}

} // namespace dnet

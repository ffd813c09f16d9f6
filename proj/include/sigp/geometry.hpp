// Convex polygon machinery for the lane partition, plus the homotopy
// signature used to compare planner decisions.
#pragma once

#include "sigp/types.hpp"

#include <vector>

namespace sigp {

/// Counter-clockwise convex polygon.
struct ConvexPolygon {
  std::vector<Vec2> vertices;

  double area() const {
    double a = 0.0;
    const std::size_t n = vertices.size();
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2& p = vertices[i];
      const Vec2& q = vertices[(i + 1) % n];
      a += p.x() * q.y() - q.x() * p.y();
    }
    return 0.5 * a;
  }

  bool contains(const Vec2& p, double tol = 1e-9) const {
    const std::size_t n = vertices.size();
    if (n < 3) return false;
    for (std::size_t i = 0; i < n; ++i) {
      const Vec2& a = vertices[i];
      const Vec2& b = vertices[(i + 1) % n];
      const Vec2 e = b - a;
      if (e.x() * (p.y() - a.y()) - e.y() * (p.x() - a.x()) < -tol) return false;
    }
    return true;
  }
};

inline ConvexPolygon rect_polygon(const Rect& r) {
  return ConvexPolygon{{{r.xmin, r.ymin}, {r.xmax, r.ymin}, {r.xmax, r.ymax}, {r.xmin, r.ymax}}};
}

/// Intersect a convex polygon with the half-plane n·x <= c.
inline ConvexPolygon clip_halfplane(const ConvexPolygon& poly, const Vec2& n, double c) {
  ConvexPolygon out;
  const std::size_t m = poly.vertices.size();
  for (std::size_t i = 0; i < m; ++i) {
    const Vec2& a = poly.vertices[i];
    const Vec2& b = poly.vertices[(i + 1) % m];
    const double da = n.dot(a) - c;
    const double db = n.dot(b) - c;
    if (da <= 0.0) out.vertices.push_back(a);
    if ((da <= 0.0) != (db <= 0.0)) out.vertices.push_back(a + (b - a) * (da / (da - db)));
  }
  return out;
}

/// Voronoi cells of `sites`, clipped to the workspace. Cell i is the set of
/// workspace points closer to site i than to any other site.
inline std::vector<ConvexPolygon> voronoi_cells(const std::vector<Vec2>& sites, const Rect& rect) {
  rect.validate();
  std::vector<ConvexPolygon> cells;
  cells.reserve(sites.size());
  for (std::size_t i = 0; i < sites.size(); ++i) {
    ConvexPolygon cell = rect_polygon(rect);
    for (std::size_t j = 0; j < sites.size() && !cell.vertices.empty(); ++j) {
      if (j == i) continue;
      const Vec2 n = sites[j] - sites[i];
      const Vec2 mid = 0.5 * (sites[i] + sites[j]);
      cell = clip_halfplane(cell, n, n.dot(mid));
    }
    cells.push_back(std::move(cell));
  }
  return cells;
}

/// Which side of each reference point a path passes on: +1 if the point lies
/// left of the path's direction at closest approach, -1 otherwise. Two plans
/// share a homotopy class (relative to point obstacles) when their
/// signatures match.
inline std::vector<int> homotopy_signature(const std::vector<Vec2>& path,
                                           const std::vector<Vec2>& points) {
  if (path.size() < 2) throw Error("homotopy_signature: path needs at least two points");
  std::vector<int> signs;
  signs.reserve(points.size());
  for (const Vec2& p : points) {
    std::size_t nearest = 0;
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < path.size(); ++i) {
      const double d = (path[i] - p).squaredNorm();
      if (d < best) {
        best = d;
        nearest = i;
      }
    }
    const std::size_t lo = nearest == 0 ? 0 : nearest - 1;
    const std::size_t hi = nearest + 1 < path.size() ? nearest + 1 : nearest;
    const Vec2 dir = path[hi] - path[lo];
    const Vec2 rel = p - path[nearest];
    const double cross = dir.x() * rel.y() - dir.y() * rel.x();
    signs.push_back(cross >= 0.0 ? 1 : -1);
  }
  return signs;
}

}  // namespace sigp

#pragma once

#include <cmath>
#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace sketchsearch {

/// A point in the map plane, meters east (x) and north (y).
struct Point2 {
  double x = 0.0;
  double y = 0.0;

  friend Point2 operator+(Point2 a, Point2 b) { return {a.x + b.x, a.y + b.y}; }
  friend Point2 operator-(Point2 a, Point2 b) { return {a.x - b.x, a.y - b.y}; }
  friend Point2 operator*(double k, Point2 a) { return {k * a.x, k * a.y}; }
  friend Point2 operator*(Point2 a, double k) { return {k * a.x, k * a.y}; }
  friend bool operator==(Point2 a, Point2 b) = default;
};

inline double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
inline double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point2 a) { return std::sqrt(a.x * a.x + a.y * a.y); }
inline double distance(Point2 a, Point2 b) { return norm(a - b); }

/// Strictly convex polygon with counter-clockwise vertices.
///
/// Construction validates the invariants (>= 3 vertices, positive signed
/// area, every turn strictly left) and throws DegeneratePolygon otherwise.
class ConvexPolygon {
 public:
  explicit ConvexPolygon(std::vector<Point2> ccw_vertices);

  const std::vector<Point2>& vertices() const { return vertices_; }
  std::size_t size() const { return vertices_.size(); }
  const Point2& operator[](std::size_t i) const { return vertices_[i]; }
  const Point2& vertex(std::ptrdiff_t i) const;  // wraps around

  double area() const;
  /// Area centroid.
  Point2 centroid() const;
  /// Mean distance of the vertices from the area centroid.
  double mean_vertex_radius() const;

  friend bool operator==(const ConvexPolygon&, const ConvexPolygon&) = default;

 private:
  std::vector<Point2> vertices_;
};

double signed_area(std::span<const Point2> ring);

/// Quickhull. Output vertices are a subset of the input, CCW, starting from
/// the lowest (x, then y) point; collinear boundary points are dropped.
ConvexPolygon convex_hull(std::span<const Point2> points);

/// Turning angle at `v` between segment prev->v and v->next, in [0, pi].
double deflection_angle(Point2 prev, Point2 v, Point2 next);

/// Sequential hull reduction: repeatedly drops the vertex with the smallest
/// deflection angle until `target` vertices remain. Ties go to the lowest
/// index. Hulls already at or below the target are returned unchanged.
ConvexPolygon reduce_hull(const ConvexPolygon& hull, std::size_t target);

/// Inside-or-on-boundary test.
bool contains(const ConvexPolygon& poly, Point2 p);

/// Plain-text "x y" point lists, one per line, '#' starts a comment.
std::vector<Point2> read_points(std::istream& in);
std::vector<Point2> load_points(const std::string& path);
void write_points(std::ostream& out, std::span<const Point2> points);

}  // namespace sketchsearch

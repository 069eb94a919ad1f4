#include "sketchsearch/geometry.hpp"

#include <algorithm>
#include <fstream>
#include <istream>
#include <limits>
#include <numbers>
#include <ostream>
#include <sstream>

#include "sketchsearch/error.hpp"

namespace sketchsearch {

namespace {

// Relative tolerance for turn tests; scaled by the product of segment lengths.
constexpr double kTurnTolerance = 1e-12;

bool strictly_left(Point2 a, Point2 b, Point2 c) {
  const Point2 ab = b - a;
  const Point2 bc = c - b;
  return cross(ab, bc) > kTurnTolerance * norm(ab) * norm(bc);
}

}  // namespace

ConvexPolygon::ConvexPolygon(std::vector<Point2> ccw_vertices)
    : vertices_(std::move(ccw_vertices)) {
  const std::size_t n = vertices_.size();
  if (n < 3) throw DegeneratePolygon("fewer than 3 vertices");
  for (const auto& v : vertices_) {
    if (!std::isfinite(v.x) || !std::isfinite(v.y)) throw DegeneratePolygon("non-finite vertex");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const Point2 a = vertices_[(i + n - 1) % n];
    const Point2 b = vertices_[i];
    const Point2 c = vertices_[(i + 1) % n];
    if (a == b || b == c) throw DegeneratePolygon("zero-length edge");
    if (!strictly_left(a, b, c)) throw DegeneratePolygon("vertices not strictly convex and counter-clockwise");
  }
  if (signed_area(vertices_) <= 0.0) throw DegeneratePolygon("non-positive signed area");
}

const Point2& ConvexPolygon::vertex(std::ptrdiff_t i) const {
  const auto n = static_cast<std::ptrdiff_t>(vertices_.size());
  return vertices_[static_cast<std::size_t>(((i % n) + n) % n)];
}

double ConvexPolygon::area() const { return signed_area(vertices_); }

Point2 ConvexPolygon::centroid() const {
  // Shoelace centroid, computed relative to the first vertex for conditioning.
  const Point2 origin = vertices_.front();
  double a2 = 0.0;
  Point2 acc;
  for (std::size_t i = 0; i < vertices_.size(); ++i) {
    const Point2 p = vertices_[i] - origin;
    const Point2 q = vertices_[(i + 1) % vertices_.size()] - origin;
    const double c = cross(p, q);
    a2 += c;
    acc = acc + c * (p + q);
  }
  return origin + (1.0 / (3.0 * a2)) * acc;
}

double ConvexPolygon::mean_vertex_radius() const {
  const Point2 c = centroid();
  double sum = 0.0;
  for (const auto& v : vertices_) sum += distance(v, c);
  return sum / static_cast<double>(vertices_.size());
}

double signed_area(std::span<const Point2> ring) {
  if (ring.size() < 3) return 0.0;
  const Point2 origin = ring.front();
  double a2 = 0.0;
  for (std::size_t i = 0; i < ring.size(); ++i) {
    a2 += cross(ring[i] - origin, ring[(i + 1) % ring.size()] - origin);
  }
  return 0.5 * a2;
}

namespace {

struct Quickhull {
  std::span<const Point2> pts;
  double eps;  // absolute cross-product threshold
  std::vector<Point2> out;

  // Appends, in order, the hull vertices strictly between p and q that lie to
  // the right of the directed line p->q.
  void chain(Point2 p, Point2 q, const std::vector<std::size_t>& right_of) {
    if (right_of.empty()) return;
    const Point2 pq = q - p;
    std::size_t far = right_of.front();
    double far_d = -1.0;
    for (std::size_t idx : right_of) {
      const double d = -cross(pq, pts[idx] - p);
      if (d > far_d) {
        far_d = d;
        far = idx;
      }
    }
    const Point2 c = pts[far];
    std::vector<std::size_t> left_part;
    std::vector<std::size_t> right_part;
    for (std::size_t idx : right_of) {
      if (idx == far) continue;
      const Point2 s = pts[idx];
      if (-cross(c - p, s - p) > eps) {
        left_part.push_back(idx);
      } else if (-cross(q - c, s - c) > eps) {
        right_part.push_back(idx);
      }
    }
    chain(p, c, left_part);
    out.push_back(c);
    chain(c, q, right_part);
  }
};

}  // namespace

ConvexPolygon convex_hull(std::span<const Point2> points) {
  if (points.size() < 3) throw DegenerateInput("convex hull needs at least 3 points");
  for (const auto& p : points) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y)) throw DegenerateInput("non-finite point");
  }
  auto lex_less = [](Point2 a, Point2 b) { return a.x < b.x || (a.x == b.x && a.y < b.y); };
  const auto [lo_it, hi_it] = std::minmax_element(points.begin(), points.end(), lex_less);
  const Point2 lo = *lo_it;
  const Point2 hi = *hi_it;
  if (lo == hi) throw DegenerateInput("all points coincide");

  double scale = 0.0;
  for (const auto& p : points) scale = std::max({scale, std::abs(p.x - lo.x), std::abs(p.y - lo.y)});
  Quickhull qh{points, kTurnTolerance * scale * scale, {}};

  std::vector<std::size_t> below;
  std::vector<std::size_t> above;
  const Point2 axis = hi - lo;
  for (std::size_t i = 0; i < points.size(); ++i) {
    const double c = cross(axis, points[i] - lo);
    if (c < -qh.eps) {
      below.push_back(i);
    } else if (c > qh.eps) {
      above.push_back(i);
    }
  }
  if (below.empty() && above.empty()) throw DegenerateInput("all points collinear");

  qh.out.push_back(lo);
  qh.chain(lo, hi, below);
  qh.out.push_back(hi);
  qh.chain(hi, lo, above);

  // Near-collinear survivors of the absolute threshold are merged here.
  std::vector<Point2> hull;
  for (std::size_t i = 0; i < qh.out.size(); ++i) {
    const Point2 prev = hull.empty() ? qh.out.back() : hull.back();
    const Point2 next = qh.out[(i + 1) % qh.out.size()];
    if (strictly_left(prev, qh.out[i], next)) hull.push_back(qh.out[i]);
  }
  if (hull.size() < 3) throw DegenerateInput("hull has fewer than 3 vertices");
  return ConvexPolygon(std::move(hull));
}

double deflection_angle(Point2 prev, Point2 v, Point2 next) {
  const Point2 a = v - prev;
  const Point2 b = next - v;
  const double la = norm(a);
  const double lb = norm(b);
  if (la == 0.0 || lb == 0.0) throw DegenerateInput("zero-length segment in deflection angle");
  const double c = std::clamp(dot(a, b) / (la * lb), -1.0, 1.0);
  return std::acos(c);
}

ConvexPolygon reduce_hull(const ConvexPolygon& hull, std::size_t target) {
  if (target < 3) throw DegenerateInput("reduction target below 3 vertices");
  std::vector<Point2> v = hull.vertices();
  if (v.size() <= target) return hull;

  // Angles that differ by less than this are treated as tied.
  constexpr double kTie = 1e-12;
  auto angle_at = [&v](std::size_t i) {
    const std::size_t n = v.size();
    return deflection_angle(v[(i + n - 1) % n], v[i], v[(i + 1) % n]);
  };

  while (v.size() > target) {
    std::size_t victim = 0;
    double best = angle_at(0);
    for (std::size_t i = 1; i < v.size(); ++i) {
      const double a = angle_at(i);
      if (a < best - kTie) {
        best = a;
        victim = i;
      }
    }
    v.erase(v.begin() + static_cast<std::ptrdiff_t>(victim));

    // Merge collinear triples so edge normals stay well defined.
    for (std::size_t i = 0; i < v.size() && v.size() > 3;) {
      const std::size_t n = v.size();
      if (!strictly_left(v[(i + n - 1) % n], v[i], v[(i + 1) % n])) {
        v.erase(v.begin() + static_cast<std::ptrdiff_t>(i));
      } else {
        ++i;
      }
    }
  }
  return ConvexPolygon(std::move(v));
}

bool contains(const ConvexPolygon& poly, Point2 p) {
  const auto& v = poly.vertices();
  for (std::size_t i = 0; i < v.size(); ++i) {
    const Point2 a = v[i];
    const Point2 b = v[(i + 1) % v.size()];
    const Point2 e = b - a;
    // Boundary tolerance of 1e-9 of the edge length.
    if (cross(e, p - a) < -1e-9 * norm(e) * std::max(1.0, norm(p - a))) return false;
  }
  return true;
}

std::vector<Point2> read_points(std::istream& in) {
  std::vector<Point2> pts;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ss(line);
    Point2 p;
    if (!(ss >> p.x)) continue;  // blank or comment-only
    if (!(ss >> p.y)) throw DegenerateInput("line " + std::to_string(lineno) + ": expected 'x y'");
    pts.push_back(p);
  }
  return pts;
}

std::vector<Point2> load_points(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DegenerateInput("cannot open point file " + path);
  return read_points(in);
}

void write_points(std::ostream& out, std::span<const Point2> points) {
  const auto old = out.precision(std::numeric_limits<double>::max_digits10);
  for (const auto& p : points) out << p.x << ' ' << p.y << '\n';
  out.precision(old);
}

}  // namespace sketchsearch

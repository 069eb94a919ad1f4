#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <sstream>

#include "sketchsearch/error.hpp"
#include "sketchsearch/geometry.hpp"
#include "sketchsearch/random.hpp"
#include "sketchsearch/semantics.hpp"

using namespace sketchsearch;

namespace {

ConvexPolygon asset_quad() {
  return reduce_hull(convex_hull(load_points(SKETCHSEARCH_TEST_DATA "/rect_stroke_661.txt")), 4);
}

ConvexPolygon random_polygon(Rng& rng, Point2 c, double r) {
  std::vector<Point2> pts;
  for (int i = 0; i < 40; ++i) pts.push_back(c + Point2{normal(rng, 0, r), normal(rng, 0, r)});
  return reduce_hull(convex_hull(pts), 3 + static_cast<std::size_t>(uniform01(rng) * 5));
}

std::size_t argmax(const std::vector<double>& p) {
  return static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
}

// Shoelace area computed independently of ConvexPolygon::area.
double shoelace(const std::vector<Point2>& v) {
  double a = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto& p = v[i];
    const auto& q = v[(i + 1) % v.size()];
    a += p.x * q.y - q.x * p.y;
  }
  return 0.5 * a;
}

}  // namespace

TEST_CASE("synthesize: reduced rectangle gives a 5-class model, interior at centroid") {
  const ConvexPolygon quad = asset_quad();
  const SoftmaxModel m = synthesize(quad, 5.0);
  CHECK(m.size() == 5);
  CHECK(m.classes()[0].role == ClassRole::Interior);
  for (std::size_t c = 1; c < 5; ++c) CHECK(m.classes()[c].role == ClassRole::Exterior);
  const auto p = class_probability(m, quad.centroid());
  CHECK(argmax(p) == 0);
  for (std::size_t c = 1; c < 5; ++c) CHECK(p[0] > p[c]);
  CHECK_THROWS_AS(synthesize(quad, 0.0), DegenerateInput);
}

TEST_CASE("synthesize: interior is argmax at the centroid of random polygons") {
  Rng rng(21);
  for (int i = 0; i < 100; ++i) {
    const ConvexPolygon poly = random_polygon(rng, {500, 500}, 40);
    CHECK(argmax(class_probability(synthesize(poly, 5.0), poly.centroid())) == 0);
  }
}

TEST_CASE("synthesize: exterior class dominates its edge wedge") {
  Rng rng(4);
  const ConvexPolygon poly = random_polygon(rng, {200, 700}, 50);
  const SoftmaxModel m = synthesize(poly, 5.0);
  for (std::size_t k = 0; k < poly.size(); ++k) {
    const Point2 a = poly[k];
    const Point2 e = poly.vertex(static_cast<std::ptrdiff_t>(k) + 1) - a;
    const Point2 n = (1.0 / norm(e)) * Point2{e.y, -e.x};
    int hits = 0;
    for (int i = 0; i < 1000; ++i) {
      const Point2 s = a + uniform01(rng) * e + (2.0 + 300.0 * uniform01(rng)) * n;
      hits += argmax(class_probability(m, s)) == k + 1 ? 1 : 0;
    }
    CHECK(hits >= 990);
  }
}

TEST_CASE("class_probability: identical classes are uniform") {
  const SoftmaxModel m({{{1, 2}, 3, ClassRole::Interior, -1},
                        {{1, 2}, 3, ClassRole::Exterior, 0},
                        {{1, 2}, 3, ClassRole::Exterior, 1},
                        {{1, 2}, 3, ClassRole::Exterior, 2}});
  for (const Point2 s : {Point2{0, 0}, Point2{1e4, -1e4}, Point2{-37, 12}}) {
    for (double p : class_probability(m, s)) CHECK(p == doctest::Approx(0.25).epsilon(1e-12));
  }
}

TEST_CASE("class_probability: normalized, positive and finite far from the sketch") {
  Rng rng(8);
  const ConvexPolygon poly = random_polygon(rng, {500, 500}, 30);
  const SoftmaxModel m = synthesize(poly, 5.0);
  for (int i = 0; i < 10000; ++i) {
    const Point2 s{2e4 * (uniform01(rng) - 0.5), 2e4 * (uniform01(rng) - 0.5)};
    const auto p = class_probability(m, s);
    CHECK(std::abs(std::accumulate(p.begin(), p.end(), 0.0) - 1.0) <= 1e-9);
    for (double v : p) {
      CHECK(std::isfinite(v));
      CHECK(v >= 0.0);
    }
  }
  // Near the boundary every class keeps strictly positive mass.
  for (double v : class_probability(m, poly[0])) CHECK(v > 0.0);
}

TEST_CASE("edge alignment: interior and edge class tie at edge midpoints") {
  Rng rng(15);
  for (int trial = 0; trial < 20; ++trial) {
    const ConvexPolygon poly = random_polygon(rng, {400, 300}, 45);
    const SoftmaxModel m = synthesize(poly, 5.0);
    for (std::size_t k = 0; k < poly.size(); ++k) {
      const Point2 mid = 0.5 * (poly[k] + poly.vertex(static_cast<std::ptrdiff_t>(k) + 1));
      const auto p = class_probability(m, mid);
      CHECK(std::abs(p[0] - p[k + 1]) <= 0.02 * std::max(p[0], p[k + 1]));
    }
  }
}

TEST_CASE("translation equivariance") {
  Rng rng(17);
  const ConvexPolygon poly = random_polygon(rng, {100, 100}, 30);
  const SoftmaxModel m = synthesize(poly, 5.0);
  for (int i = 0; i < 200; ++i) {
    const Point2 shift{1000 * (uniform01(rng) - 0.5), 1000 * (uniform01(rng) - 0.5)};
    std::vector<Point2> moved;
    for (const auto& v : poly.vertices()) moved.push_back(v + shift);
    const SoftmaxModel m2 = synthesize(ConvexPolygon(moved), 5.0);
    const Point2 s{100 + normal(rng, 0, 40), 100 + normal(rng, 0, 40)};
    const auto a = class_probability(m, s);
    const auto b = class_probability(m2, s + shift);
    for (std::size_t c = 0; c < a.size(); ++c) CHECK(std::abs(a[c] - b[c]) <= 1e-9);
  }
}

TEST_CASE("inflate") {
  const ConvexPolygon sq({{0, 0}, {1, 0}, {1, 1}, {0, 1}});
  const ConvexPolygon big = inflate(sq, 4.0);
  CHECK(big.vertices() == std::vector<Point2>{{-0.5, -0.5}, {1.5, -0.5}, {1.5, 1.5}, {-0.5, 1.5}});
  CHECK(big.centroid().x == doctest::Approx(0.5));
  CHECK(inflate(sq, 1.0) == sq);
  CHECK_THROWS_AS(inflate(sq, 0.5), DegenerateInput);

  const ConvexPolygon quad = asset_quad();
  const ConvexPolygon near = inflate(quad, 3.0);
  const double ratio = shoelace(near.vertices()) / shoelace(quad.vertices());
  CHECK(ratio == doctest::Approx(3.0).epsilon(0.01));
  for (const auto& v : quad.vertices()) CHECK(contains(near, v));
}

TEST_CASE("range-bearing composite likelihood") {
  const ConvexPolygon quad = asset_quad();
  const SoftmaxModel bearing = synthesize(quad, 5.0);
  const RangeModel range = make_range_model(quad, 3.0, 5.0);
  const double ratio = range.near_polygon.area() / quad.area();
  CHECK(ratio == doctest::Approx(3.0).epsilon(0.01));

  const Point2 c = quad.centroid();
  CHECK(range_bearing_likelihood(range, bearing, c, true, 0) > 0.999);

  const Point2 far = c + Point2{500, 0};
  const double pn = range.p_near(far);
  std::size_t best = 0;
  const auto pb = class_probability(bearing, far);
  best = argmax(pb);
  CHECK(range_bearing_likelihood(range, bearing, far, true, best) < 0.01);
  CHECK(pn < 0.01);

  Rng rng(2);
  for (int i = 0; i < 500; ++i) {
    const Point2 s = c + Point2{normal(rng, 0, 200), normal(rng, 0, 200)};
    for (std::size_t k = 0; k < bearing.size(); ++k) {
      const double yes = range_bearing_likelihood(range, bearing, s, true, k);
      const double no = range_bearing_likelihood(range, bearing, s, false, k);
      CHECK(yes + no == doctest::Approx(bearing.probability(k, s)).epsilon(1e-12));
    }
    CHECK(range.p_near(s) + (1.0 - range.p_near(s)) == 1.0);
  }
}

TEST_CASE("model dump rows are 'role wx wy b' in absolute coordinates") {
  const ConvexPolygon sq({{0, 0}, {10, 0}, {10, 10}, {0, 10}});
  std::ostringstream out;
  dump_model(out, synthesize(sq, 2.0));
  std::istringstream in(out.str());
  std::string role;
  double wx, wy, b;
  std::vector<std::tuple<std::string, double, double, double>> rows;
  while (in >> role >> wx >> wy >> b) rows.emplace_back(role, wx, wy, b);
  REQUIRE(rows.size() == 5);
  CHECK(std::get<0>(rows[0]) == "interior");
  // Edge 0 runs (0,0)->(10,0): outward normal (0,-1), boundary y = 0.
  CHECK(std::get<0>(rows[1]) == "exterior");
  CHECK(std::get<1>(rows[1]) == doctest::Approx(0.0));
  CHECK(std::get<2>(rows[1]) == doctest::Approx(-2.0));
  CHECK(std::get<3>(rows[1]) == doctest::Approx(0.0).epsilon(1e-12));
  // Edge 1 runs (10,0)->(10,10): normal (1,0), boundary x = 10 -> bias -20.
  CHECK(std::get<1>(rows[2]) == doctest::Approx(2.0));
  CHECK(std::get<3>(rows[2]) == doctest::Approx(-20.0));
}

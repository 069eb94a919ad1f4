#include "sketchsearch/semantics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>

#include "sketchsearch/error.hpp"

namespace sketchsearch {

SoftmaxModel::SoftmaxModel(std::vector<SoftmaxClass> classes, Point2 anchor)
    : classes_(std::move(classes)), anchor_(anchor) {}

void SoftmaxModel::probabilities(Point2 s, std::span<double> out) const {
  const Point2 rel = s - anchor_;
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < classes_.size(); ++c) {
    out[c] = dot(classes_[c].weight, rel) + classes_[c].bias;
    top = std::max(top, out[c]);
  }
  double total = 0.0;
  for (std::size_t c = 0; c < classes_.size(); ++c) {
    out[c] = std::exp(out[c] - top);
    total += out[c];
  }
  for (std::size_t c = 0; c < classes_.size(); ++c) out[c] /= total;
}

std::vector<double> SoftmaxModel::probabilities(Point2 s) const {
  std::vector<double> p(classes_.size());
  probabilities(s, p);
  return p;
}

double SoftmaxModel::probability(std::size_t cls, Point2 s) const {
  const Point2 rel = s - anchor_;
  const double own = dot(classes_[cls].weight, rel) + classes_[cls].bias;
  // p = 1 / sum_k exp(l_k - l_cls); computed with max-subtraction.
  double top = own;
  for (const auto& c : classes_) top = std::max(top, dot(c.weight, rel) + c.bias);
  double total = 0.0;
  for (const auto& c : classes_) total += std::exp(dot(c.weight, rel) + c.bias - top);
  return std::exp(own - top) / total;
}

std::vector<SoftmaxClass> SoftmaxModel::absolute_classes() const {
  std::vector<SoftmaxClass> out = classes_;
  for (auto& c : out) c.bias -= dot(c.weight, anchor_);
  return out;
}

SoftmaxModel synthesize(const ConvexPolygon& poly, double steepness) {
  if (!(steepness > 0.0)) throw DegenerateInput("softmax steepness must be positive");
  const Point2 anchor = poly.centroid();
  std::vector<SoftmaxClass> classes;
  classes.reserve(poly.size() + 1);
  classes.push_back({{0.0, 0.0}, 0.0, ClassRole::Interior, -1});
  for (std::size_t i = 0; i < poly.size(); ++i) {
    const Point2 a = poly[i];
    const Point2 b = poly.vertex(static_cast<std::ptrdiff_t>(i) + 1);
    const Point2 e = b - a;
    const double len = norm(e);
    if (len == 0.0) throw DegeneratePolygon("zero-length edge");
    const Point2 outward{e.y / len, -e.x / len};  // right-hand normal of a CCW edge
    const Point2 w = steepness * outward;
    // w.(s - anchor) + bias = 0 on the edge line.
    classes.push_back({w, -dot(w, a - anchor), ClassRole::Exterior, static_cast<int>(i)});
  }
  return SoftmaxModel(std::move(classes), anchor);
}

std::vector<double> class_probability(const SoftmaxModel& model, Point2 s) {
  return model.probabilities(s);
}

ConvexPolygon inflate(const ConvexPolygon& poly, double ratio) {
  if (!(ratio >= 1.0)) throw DegenerateInput("inflation ratio must be >= 1");
  if (ratio == 1.0) return poly;
  const Point2 c = poly.centroid();
  const double k = std::sqrt(ratio);
  std::vector<Point2> v;
  v.reserve(poly.size());
  for (const auto& p : poly.vertices()) v.push_back(c + k * (p - c));
  return ConvexPolygon(std::move(v));
}

RangeModel make_range_model(const ConvexPolygon& base, double area_ratio, double steepness) {
  ConvexPolygon near = inflate(base, area_ratio);
  SoftmaxModel model = synthesize(near, steepness);
  return RangeModel{std::move(near), std::move(model)};
}

double range_bearing_likelihood(const RangeModel& range, const SoftmaxModel& bearing, Point2 s,
                                bool wants_near, std::size_t bearing_class) {
  const double near = range.p_near(s);
  const double b = bearing.probability(bearing_class, s);
  return (wants_near ? near : 1.0 - near) * b;
}

void dump_model(std::ostream& out, const SoftmaxModel& model) {
  const auto old = out.precision(std::numeric_limits<double>::max_digits10);
  for (const auto& c : model.absolute_classes()) {
    out << (c.role == ClassRole::Interior ? "interior" : "exterior") << ' ' << c.weight.x << ' '
        << c.weight.y << ' ' << c.bias << '\n';
  }
  out.precision(old);
}

}  // namespace sketchsearch

#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "sketchsearch/geometry.hpp"

namespace sketchsearch {

enum class ClassRole { Interior, Exterior };

struct SoftmaxClass {
  Point2 weight;  // per meter
  double bias = 0.0;
  ClassRole role = ClassRole::Interior;
  int edge = -1;  // polygon edge index for Exterior classes
};

/// Linear softmax over the plane: p(c|s) = exp(w_c.s + b_c) / sum_k exp(w_k.s + b_k).
///
/// Logits are evaluated relative to an anchor point (the polygon centroid for
/// synthesized models) so large map coordinates do not lose precision.
class SoftmaxModel {
 public:
  SoftmaxModel() = default;
  SoftmaxModel(std::vector<SoftmaxClass> classes, Point2 anchor = {});

  std::size_t size() const { return classes_.size(); }
  const std::vector<SoftmaxClass>& classes() const { return classes_; }
  Point2 anchor() const { return anchor_; }

  /// Writes p(.|s) into `out` (size() entries).
  void probabilities(Point2 s, std::span<double> out) const;
  std::vector<double> probabilities(Point2 s) const;
  double probability(std::size_t cls, Point2 s) const;

  /// Same model with weights/biases expressed for absolute coordinates.
  std::vector<SoftmaxClass> absolute_classes() const;

 private:
  std::vector<SoftmaxClass> classes_;  // biases relative to anchor_
  Point2 anchor_;
};

/// Interior class (index 0, reference with zero weight) plus one Exterior
/// class per edge whose weight is steepness times the outward unit normal and
/// whose decision boundary against Interior is the edge line.
SoftmaxModel synthesize(const ConvexPolygon& poly, double steepness);

std::vector<double> class_probability(const SoftmaxModel& model, Point2 s);

/// Scales the polygon about its centroid so its area grows by `ratio`.
ConvexPolygon inflate(const ConvexPolygon& poly, double ratio);

/// Single-label "Near" range model: interior class of an inflated copy.
struct RangeModel {
  ConvexPolygon near_polygon;
  SoftmaxModel near_softmax;

  double p_near(Point2 s) const { return near_softmax.probability(0, s); }
};

RangeModel make_range_model(const ConvexPolygon& base, double area_ratio, double steepness);

/// p(Near, bearing_class | s) under range/bearing independence; the
/// complement (1 - p(Near|s)) stands in for "not Near".
double range_bearing_likelihood(const RangeModel& range, const SoftmaxModel& bearing, Point2 s,
                                bool wants_near, std::size_t bearing_class);

/// One "role wx wy b" row per class, absolute coordinates.
void dump_model(std::ostream& out, const SoftmaxModel& model);

}  // namespace sketchsearch

#pragma once

#include <array>
#include <bitset>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "sketchsearch/geometry.hpp"
#include "sketchsearch/random.hpp"
#include "sketchsearch/semantics.hpp"

namespace sketchsearch {

/// Compass bearings, counter-clockwise from East; label k is centred on k*45
/// degrees and covers the closed interval [k*45 - 45, k*45 + 45].
enum class Bearing : int { E = 0, NE, N, NW, W, SW, S, SE };
inline constexpr std::size_t kBearingCount = 8;

/// Everything a statement or query may assert about a sketch.
enum class Relation : int { Inside = 0, Near, E, NE, N, NW, W, SW, S, SE };
inline constexpr std::size_t kRelationCount = 10;

std::string_view bearing_name(Bearing b);
std::string_view relation_name(Relation r);
std::optional<Relation> parse_relation(std::string_view name);
std::optional<Bearing> as_bearing(Relation r);
Relation as_relation(Bearing b);

using LabelSet = std::bitset<kBearingCount>;

/// Labels whose interval contains theta (radians, any range).
LabelSet canonical_labels(double theta);

/// Joint p(c, l) and its two conditionals; rows are classes, columns labels.
struct LabelTables {
  Eigen::MatrixXd joint;
  Eigen::MatrixXd class_given_label;  // columns sum to 1
  Eigen::MatrixXd label_given_class;  // rows sum to 1
};

/// Monte Carlo auto-labeling over `samples` equally spaced points on a ring.
LabelTables build_tables(const SoftmaxModel& model, Point2 centroid, double ring_radius,
                         std::size_t samples);

/// Conditionals from an arbitrary joint (shared by the ring builder and by
/// test oracles that sample differently).
LabelTables tables_from_joint(Eigen::MatrixXd joint);

void dump_tables_csv(std::ostream& out, const Eigen::MatrixXd& table);

struct SketchConfig {
  std::size_t vertex_target = 4;
  double steepness = 5.0;        // per meter
  double near_area_ratio = 3.0;
  double ring_radius_scale = 1.5;  // times mean vertex radius
  std::size_t ring_samples = 360;
};

/// A processed human sketch: raw stroke, hull, reduced polygon and every
/// model derived from it.
struct SketchRecord {
  std::string label;
  std::vector<Point2> points;
  ConvexPolygon hull;
  ConvexPolygon polygon;
  std::optional<double> delta;  // terrain multiplier, if the human gave one
  SoftmaxModel bearing;
  RangeModel range;
  LabelTables tables;
  double ring_radius = 0.0;
};

/// geometry -> softmax -> range model -> label tables.
SketchRecord build_sketch(std::string label, std::vector<Point2> points, std::optional<double> delta,
                          const SketchConfig& config = {});

/// Truthful p(yes | s) for "target is <relation> <sketch>".
double relation_likelihood(const SketchRecord& sketch, Relation relation, Point2 s);

/// p(l | s) = sum_c p(l|c) p(c|s).
std::array<double, kBearingCount> label_distribution(const SketchRecord& sketch, Point2 s);

Bearing generate_label(const SketchRecord& sketch, Point2 s, Rng& rng);

/// Multiplies each weight by sum_c p(c|s)p(c|l) (or its complement when the
/// answer is negative) and renormalizes. Throws ZeroLikelihood if every weight
/// vanishes; the weights are left untouched in that case.
void fuse_label(std::span<double> weights, std::span<const Point2> states, const SketchRecord& sketch,
                Bearing label, bool positive);

}  // namespace sketchsearch

#include "sketchsearch/autolabel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include <spdlog/spdlog.h>

#include "sketchsearch/error.hpp"

namespace sketchsearch {

namespace {

constexpr std::array<std::string_view, kBearingCount> kBearingNames = {"E", "NE", "N", "NW",
                                                                       "W", "SW", "S", "SE"};
constexpr std::array<std::string_view, kRelationCount> kRelationNames = {
    "Inside", "Near", "E", "NE", "N", "NW", "W", "SW", "S", "SE"};

// Membership slack at interval ends, radians.
constexpr double kBoundarySlack = 1e-9;

// Sketch polygons are capped at kMaxClasses - 1 vertices so per-call class
// probabilities fit on the stack.
constexpr std::size_t kMaxClasses = 32;

}  // namespace

std::string_view bearing_name(Bearing b) { return kBearingNames[static_cast<std::size_t>(b)]; }

std::string_view relation_name(Relation r) { return kRelationNames[static_cast<std::size_t>(r)]; }

std::optional<Relation> parse_relation(std::string_view name) {
  for (std::size_t i = 0; i < kRelationCount; ++i) {
    if (kRelationNames[i] == name) return static_cast<Relation>(i);
  }
  static constexpr std::array<std::pair<std::string_view, Relation>, 8> kLong = {{
      {"East", Relation::E},
      {"NorthEast", Relation::NE},
      {"North", Relation::N},
      {"NorthWest", Relation::NW},
      {"West", Relation::W},
      {"SouthWest", Relation::SW},
      {"South", Relation::S},
      {"SouthEast", Relation::SE},
  }};
  for (const auto& [n, r] : kLong) {
    if (n == name) return r;
  }
  return std::nullopt;
}

std::optional<Bearing> as_bearing(Relation r) {
  const int i = static_cast<int>(r);
  if (i < static_cast<int>(Relation::E)) return std::nullopt;
  return static_cast<Bearing>(i - static_cast<int>(Relation::E));
}

Relation as_relation(Bearing b) {
  return static_cast<Relation>(static_cast<int>(b) + static_cast<int>(Relation::E));
}

LabelSet canonical_labels(double theta) {
  constexpr double two_pi = 2.0 * std::numbers::pi;
  constexpr double quarter = std::numbers::pi / 4.0;
  theta = std::fmod(theta, two_pi);
  if (theta < 0.0) theta += two_pi;
  LabelSet out;
  for (std::size_t k = 0; k < kBearingCount; ++k) {
    // Angular distance from the label centre, folded into [0, pi].
    double d = std::abs(theta - static_cast<double>(k) * quarter);
    d = std::min(d, two_pi - d);
    if (d <= quarter + kBoundarySlack) out.set(k);
  }
  return out;
}

LabelTables tables_from_joint(Eigen::MatrixXd joint) {
  LabelTables t;
  t.joint = std::move(joint);
  const Eigen::Index classes = t.joint.rows();
  const Eigen::Index labels = t.joint.cols();

  t.class_given_label.resize(classes, labels);
  for (Eigen::Index l = 0; l < labels; ++l) {
    const double mass = t.joint.col(l).sum();
    if (mass > 0.0) {
      t.class_given_label.col(l) = t.joint.col(l) / mass;
    } else {
      spdlog::warn("label column {} has no class mass; using a uniform p(c|l)", l);
      t.class_given_label.col(l).setConstant(1.0 / static_cast<double>(classes));
    }
  }

  t.label_given_class.resize(classes, labels);
  for (Eigen::Index c = 0; c < classes; ++c) {
    const double mass = t.joint.row(c).sum();
    if (mass > 0.0) {
      t.label_given_class.row(c) = t.joint.row(c) / mass;
    } else {
      t.label_given_class.row(c).setConstant(1.0 / static_cast<double>(labels));
    }
  }
  return t;
}

LabelTables build_tables(const SoftmaxModel& model, Point2 centroid, double ring_radius,
                         std::size_t samples) {
  if (samples < kBearingCount) throw DegenerateInput("auto-labeling needs at least 8 ring samples");
  if (!(ring_radius > 0.0)) throw DegenerateInput("ring radius must be positive");
  const auto classes = static_cast<Eigen::Index>(model.size());
  Eigen::MatrixXd joint = Eigen::MatrixXd::Zero(classes, kBearingCount);
  std::vector<double> p(model.size());
  for (std::size_t j = 0; j < samples; ++j) {
    const double theta = 2.0 * std::numbers::pi * static_cast<double>(j) / static_cast<double>(samples);
    const Point2 s = centroid + ring_radius * Point2{std::cos(theta), std::sin(theta)};
    model.probabilities(s, p);
    const LabelSet labels = canonical_labels(theta);
    for (std::size_t l = 0; l < kBearingCount; ++l) {
      if (!labels.test(l)) continue;
      for (Eigen::Index c = 0; c < classes; ++c) joint(c, static_cast<Eigen::Index>(l)) += p[static_cast<std::size_t>(c)];
    }
  }
  joint /= static_cast<double>(samples);
  return tables_from_joint(std::move(joint));
}

void dump_tables_csv(std::ostream& out, const Eigen::MatrixXd& table) {
  out << "class";
  for (auto name : kBearingNames) out << ',' << name;
  out << '\n';
  for (Eigen::Index c = 0; c < table.rows(); ++c) {
    out << c;
    for (Eigen::Index l = 0; l < table.cols(); ++l) out << ',' << table(c, l);
    out << '\n';
  }
}

SketchRecord build_sketch(std::string label, std::vector<Point2> points, std::optional<double> delta,
                          const SketchConfig& config) {
  if (label.empty()) throw DegenerateInput("sketch label must not be empty");
  if (config.vertex_target < 3 || config.vertex_target >= kMaxClasses) {
    throw DegenerateInput("sketch vertex target must be in [3, 31]");
  }
  ConvexPolygon hull = convex_hull(points);
  ConvexPolygon polygon = reduce_hull(hull, config.vertex_target);
  SoftmaxModel bearing = synthesize(polygon, config.steepness);
  RangeModel range = make_range_model(polygon, config.near_area_ratio, config.steepness);
  const double radius = config.ring_radius_scale * polygon.mean_vertex_radius();
  LabelTables tables = build_tables(bearing, polygon.centroid(), radius, config.ring_samples);
  return SketchRecord{std::move(label), std::move(points), std::move(hull),  std::move(polygon),
                      delta,            std::move(bearing), std::move(range), std::move(tables),
                      radius};
}

namespace {

double label_likelihood(const SketchRecord& sketch, std::span<const double> class_probs, Bearing label) {
  const auto l = static_cast<Eigen::Index>(label);
  double sum = 0.0;
  for (std::size_t c = 0; c < class_probs.size(); ++c) {
    sum += class_probs[c] * sketch.tables.class_given_label(static_cast<Eigen::Index>(c), l);
  }
  return std::clamp(sum, 0.0, 1.0);
}

}  // namespace

double relation_likelihood(const SketchRecord& sketch, Relation relation, Point2 s) {
  switch (relation) {
    case Relation::Inside:
      return sketch.bearing.probability(0, s);
    case Relation::Near:
      return sketch.range.p_near(s);
    default:
      break;
  }
  std::array<double, kMaxClasses> buf{};
  std::span<double> p(buf.data(), sketch.bearing.size());
  sketch.bearing.probabilities(s, p);
  return label_likelihood(sketch, p, *as_bearing(relation));
}

std::array<double, kBearingCount> label_distribution(const SketchRecord& sketch, Point2 s) {
  std::array<double, kMaxClasses> buf{};
  std::span<double> p(buf.data(), sketch.bearing.size());
  sketch.bearing.probabilities(s, p);
  std::array<double, kBearingCount> out{};
  for (std::size_t l = 0; l < kBearingCount; ++l) {
    for (std::size_t c = 0; c < p.size(); ++c) {
      out[l] += sketch.tables.label_given_class(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(l)) * p[c];
    }
  }
  return out;
}

Bearing generate_label(const SketchRecord& sketch, Point2 s, Rng& rng) {
  const auto dist = label_distribution(sketch, s);
  std::discrete_distribution<int> pick(dist.begin(), dist.end());
  return static_cast<Bearing>(pick(rng));
}

void fuse_label(std::span<double> weights, std::span<const Point2> states, const SketchRecord& sketch,
                Bearing label, bool positive) {
  if (weights.size() != states.size()) throw DegenerateInput("weights and states differ in length");
  std::vector<double> updated(weights.begin(), weights.end());
  std::array<double, kMaxClasses> buf{};
  std::span<double> p(buf.data(), sketch.bearing.size());
  double total = 0.0;
  for (std::size_t i = 0; i < states.size(); ++i) {
    sketch.bearing.probabilities(states[i], p);
    const double lik = label_likelihood(sketch, p, label);
    updated[i] *= positive ? lik : 1.0 - lik;
    total += updated[i];
  }
  if (!(total > 0.0)) throw ZeroLikelihood("label fusion removed all belief mass");
  for (std::size_t i = 0; i < weights.size(); ++i) weights[i] = updated[i] / total;
}

}  // namespace sketchsearch

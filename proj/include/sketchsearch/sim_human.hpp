#pragma once

#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "sketchsearch/autolabel.hpp"
#include "sketchsearch/codebook.hpp"
#include "sketchsearch/geometry.hpp"
#include "sketchsearch/random.hpp"
#include "sketchsearch/world.hpp"

namespace sketchsearch {

/// Sketch emulator parameters: centroid, mean vertex radius and its spread,
/// Poisson mean of extra vertices, angular-gap spread.
struct SketchParams {
  Point2 centroid;
  double r = 50.0;
  double sigma = 5.0;
  double lambda = 2.0;
  double psi = 0.2;
};

ConvexPolygon pseud_generate(const SketchParams& params, Rng& rng);

enum class InteractionMode { Active, Passive, Both };
const char* interaction_mode_name(InteractionMode m);
std::optional<InteractionMode> parse_interaction_mode(const std::string& s);

struct HumanModel {
  double eta = 0.95;
  double xi = 0.9;
  double sketch_period = 60.0;  // seconds; kNever disables sketching
  InteractionMode mode = InteractionMode::Active;
  double push_period = kNever;  // passive statements
  double glimpse_period = 30.0;
  double glimpse_noise = 25.0;
  double sketch_sigma_ratio = 0.1;  // radius s.d. as a fraction of the landmark radius
  double sketch_lambda = 2.0;
  double sketch_psi = 0.2;

  bool answers_queries() const { return mode != InteractionMode::Passive; }
  bool volunteers() const { return mode != InteractionMode::Active; }
  AnswerModel answer_model() const { return {eta, xi}; }
};

/// General accuracy corruption: each answer keeps eta of its mass and spreads
/// the remainder uniformly over the other answers.
std::vector<double> corrupt_likelihood(std::span<const double> p, double eta);

HumanAnswer answer_query(const TargetState& truth, const Query& query, const Codebook& book,
                         const HumanModel& human, Rng& rng);

/// Relation distribution a truthful human uses to describe `s` relative to a sketch.
std::array<double, kRelationCount> statement_distribution(const SketchRecord& sketch, Point2 s);

std::optional<Statement> volunteer_statement(Point2 truth, const Codebook& book, const HumanModel& human,
                                             Rng& rng);

/// Periodic sketching of landmarks, nearest to the latest sighting first.
class SketchScheduler {
 public:
  explicit SketchScheduler(const HumanModel& human) : human_(human), next_(human.sketch_period) {}

  std::optional<SketchRecord> maybe_sketch(double clock, const std::vector<Landmark>& landmarks,
                                           const std::optional<Point2>& sighting, const SketchConfig& config,
                                           Rng& rng);
  const std::set<std::string>& sketched() const { return sketched_; }

 private:
  HumanModel human_;
  double next_;
  std::set<std::string> sketched_;
};

}  // namespace sketchsearch

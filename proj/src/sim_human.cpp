#include "sketchsearch/sim_human.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include "sketchsearch/error.hpp"

namespace sketchsearch {

namespace {

ConvexPolygon regular_polygon(Point2 c, double r, int n) {
  std::vector<Point2> v;
  for (int i = 0; i < n; ++i) {
    const double t = 2.0 * std::numbers::pi * i / n;
    v.push_back(c + r * Point2{std::cos(t), std::sin(t)});
  }
  return ConvexPolygon(std::move(v));
}

}  // namespace

ConvexPolygon pseud_generate(const SketchParams& params, Rng& rng) {
  if (!(params.r > 0) || params.sigma < 0 || params.lambda < 0 || params.psi < 0) {
    throw ConfigError("invalid sketch emulator parameters");
  }
  const int nv = 3 + (params.lambda > 0 ? std::poisson_distribution<int>(params.lambda)(rng) : 0);
  for (int attempt = 0; attempt < 10; ++attempt) {
    std::vector<double> gaps(static_cast<std::size_t>(nv));
    for (auto& g : gaps) g = std::max(0.0, normal(rng, 2.0 * std::numbers::pi / nv, params.psi));
    const double total = std::accumulate(gaps.begin(), gaps.end(), 0.0);
    if (!(total > 0)) continue;
    std::vector<Point2> pts;
    double theta = 2.0 * std::numbers::pi * uniform01(rng);
    for (double g : gaps) {
      double radius;
      do {
        radius = normal(rng, params.r, params.sigma);
      } while (radius <= 0);
      pts.push_back(params.centroid + radius * Point2{std::cos(theta), std::sin(theta)});
      theta += g * 2.0 * std::numbers::pi / total;
    }
    // A vertex swallowed by the hull would change the drawn vertex count.
    try {
      auto hull = convex_hull(pts);
      if (hull.size() == pts.size()) return hull;
    } catch (const DegenerateInput&) {
    }
  }
  return regular_polygon(params.centroid, params.r, nv);
}

const char* interaction_mode_name(InteractionMode m) {
  switch (m) {
    case InteractionMode::Active: return "active";
    case InteractionMode::Passive: return "passive";
    case InteractionMode::Both: return "both";
  }
  return "?";
}

std::optional<InteractionMode> parse_interaction_mode(const std::string& s) {
  if (s == "active") return InteractionMode::Active;
  if (s == "passive") return InteractionMode::Passive;
  if (s == "both") return InteractionMode::Both;
  return std::nullopt;
}

std::vector<double> corrupt_likelihood(std::span<const double> p, double eta) {
  const std::size_t n = p.size();
  std::vector<double> out(n, 0.0);
  if (n == 0) return out;
  if (n == 1) return {1.0};
  for (std::size_t j = 0; j < n; ++j) {
    out[j] += eta * p[j];
    const double spill = (1.0 - eta) * p[j] / static_cast<double>(n - 1);
    for (std::size_t k = 0; k < n; ++k) {
      if (k != j) out[k] += spill;
    }
  }
  const double total = std::accumulate(out.begin(), out.end(), 0.0);
  for (auto& v : out) v /= total;
  return out;
}

HumanAnswer answer_query(const TargetState& truth, const Query& query, const Codebook& book,
                         const HumanModel& human, Rng& rng) {
  if (query.is_null()) return HumanAnswer::Null;
  const double yes = query_truth(book, query, truth);  // validates the sketch reference
  if (uniform01(rng) >= human.xi) return HumanAnswer::Null;
  const double p[2] = {yes, 1.0 - yes};
  const auto c = corrupt_likelihood(p, human.eta);
  return uniform01(rng) < c[0] ? HumanAnswer::Yes : HumanAnswer::No;
}

std::array<double, kRelationCount> statement_distribution(const SketchRecord& sketch, Point2 s) {
  std::array<double, kRelationCount> q{};
  const double inside = relation_likelihood(sketch, Relation::Inside, s);
  const double near = std::max(relation_likelihood(sketch, Relation::Near, s) - inside, 0.0);
  q[static_cast<std::size_t>(Relation::Inside)] = inside;
  q[static_cast<std::size_t>(Relation::Near)] = near;
  const double rest = std::max(1.0 - inside - near, 0.0);
  const auto labels = label_distribution(sketch, s);
  for (std::size_t l = 0; l < kBearingCount; ++l) {
    q[static_cast<std::size_t>(as_relation(static_cast<Bearing>(l)))] = rest * labels[l];
  }
  return q;
}

std::optional<Statement> volunteer_statement(Point2 truth, const Codebook& book, const HumanModel& human,
                                             Rng& rng) {
  if (book.sketches().empty()) return std::nullopt;
  const auto& sketches = book.sketches();
  const auto nearest = std::min_element(sketches.begin(), sketches.end(), [&](const auto& a, const auto& b) {
    return distance(a->polygon.centroid(), truth) < distance(b->polygon.centroid(), truth);
  });
  const auto dist = statement_distribution(**nearest, truth);
  std::discrete_distribution<int> pick(dist.begin(), dist.end());
  Statement st;
  st.relation = static_cast<Relation>(pick(rng));
  st.label = (*nearest)->label;
  st.positive = uniform01(rng) < human.eta;
  return st;
}

std::optional<SketchRecord> SketchScheduler::maybe_sketch(double clock, const std::vector<Landmark>& landmarks,
                                                          const std::optional<Point2>& sighting,
                                                          const SketchConfig& config, Rng& rng) {
  if (!std::isfinite(next_) || clock + 1e-9 < next_) return std::nullopt;
  next_ += human_.sketch_period;
  std::vector<const Landmark*> open;
  for (const auto& lm : landmarks) {
    if (!sketched_.contains(lm.name)) open.push_back(&lm);
  }
  if (open.empty()) return std::nullopt;
  const Landmark* chosen = nullptr;
  if (sighting) {
    chosen = *std::min_element(open.begin(), open.end(), [&](const Landmark* a, const Landmark* b) {
      return distance(a->centroid, *sighting) < distance(b->centroid, *sighting);
    });
  } else {
    const auto k = std::min(open.size() - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(open.size())));
    chosen = open[k];
  }
  const SketchParams params{chosen->centroid, chosen->radius, human_.sketch_sigma_ratio * chosen->radius,
                            human_.sketch_lambda, human_.sketch_psi};
  const ConvexPolygon poly = pseud_generate(params, rng);
  sketched_.insert(chosen->name);
  return build_sketch(chosen->name, poly.vertices(), chosen->delta, config);
}

}  // namespace sketchsearch

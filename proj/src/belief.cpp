#include "sketchsearch/belief.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <spdlog/spdlog.h>

namespace sketchsearch {

double effective_sample_size(std::span<const double> weights) {
  double sum = 0.0;
  double sq = 0.0;
  for (double w : weights) {
    sum += w;
    sq += w * w;
  }
  return sq > 0 ? sum * sum / sq : 0.0;
}

std::vector<std::size_t> systematic_resample(std::span<const double> weights, std::size_t n, Rng& rng) {
  std::vector<std::size_t> out;
  if (n == 0 || weights.empty()) return out;
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0)) throw EmptyBelief("cannot resample zero-weight particles");
  out.reserve(n);
  const double step = total / static_cast<double>(n);
  double u = uniform01(rng) * step;
  double cum = weights[0];
  std::size_t i = 0;
  for (std::size_t k = 0; k < n; ++k) {
    while (u > cum && i + 1 < weights.size()) cum += weights[++i];
    out.push_back(i);
    u += step;
  }
  return out;
}

Belief::Belief(std::vector<TargetState> states, std::vector<double> weights)
    : set_(std::move(states), std::move(weights)) {
  if (set_.size() == 0) throw EmptyBelief("belief needs at least one particle");
}

Belief Belief::road_prior(const RoadNetwork& net, std::size_t n, double on_road, Rng& rng) {
  if (n == 0) throw EmptyBelief("belief needs at least one particle");
  std::vector<TargetState> states;
  states.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    TargetState t = target_on_road(net, net.sample_road_point(rng), uniform01(rng) < 0.5);
    if (uniform01(rng) >= on_road) {
      t.mode = Mode::OffRoad;
      t.heading = 2.0 * std::numbers::pi * uniform01(rng);
    }
    states.push_back(t);
  }
  return Belief(std::move(states), std::vector<double>(n, 1.0 / static_cast<double>(n)));
}

void Belief::reinitialize(const RoadNetwork& net, Rng& rng) {
  ++fallbacks_;
  spdlog::warn("belief weights degenerate; reinitializing from the road prior");
  set_ = road_prior(net, set_.size(), kFallbackOnRoad, rng).set_;
}

void Belief::predict(const RoadNetwork& net, const TargetDynamics& dyn, const TerrainGrid& grid, double dt,
                     Rng& rng) {
  if (!(dt > 0)) return;
  set_.transform([&](const TargetState& s) { return step_target(net, dyn, grid, s, dt, rng); });
}

void Belief::update_robot(RobotObs o, const RobotState& robot, const SensorModel& sensor, const RoadNetwork& net,
                          Rng& rng) {
  const auto k = static_cast<std::size_t>(o);
  const ViewCone cone(sensor, robot.position, robot.heading);
  reweight([&](const TargetState& s) { return sense_likelihood(cone, s.position)[k]; }, net, rng);
}

void Belief::update_human(HumanAnswer a, const Query& query, const Codebook& book, const AnswerModel& model,
                          const RoadNetwork& net, Rng& rng) {
  if (query.is_null()) return;
  reweight([&](const TargetState& s) { return answer_likelihood(book, query, a, s, model); }, net, rng);
}

void Belief::weight_and_resample(RobotObs o_r, HumanAnswer o_h, const Query& query, const RobotState& robot,
                                 const SensorModel& sensor, const Codebook& book, const AnswerModel& model,
                                 const RoadNetwork& net, Rng& rng) {
  const auto k = static_cast<std::size_t>(o_r);
  const ViewCone cone(sensor, robot.position, robot.heading);
  reweight(
      [&](const TargetState& s) {
        const double pr = sense_likelihood(cone, s.position)[k];
        return query.is_null() ? pr : pr * answer_likelihood(book, query, o_h, s, model);
      },
      net, rng);
}

void Belief::fuse_statement(const Statement& st, const Codebook& book, double eta, const RoadNetwork& net,
                            Rng& rng) {
  if (!book.find(st.label)) throw UnknownReference("no sketch labelled '" + st.label + "'");
  reweight([&](const TargetState& s) { return statement_likelihood(book, st, s.position, eta); }, net, rng);
}

double Belief::mode_probability(Mode m) const {
  double p = 0.0;
  for (std::size_t i = 0; i < size(); ++i) {
    if (states()[i].mode == m) p += weights()[i];
  }
  return std::clamp(p, 0.0, 1.0);
}

double Belief::mass_in(const ConvexPolygon& poly) const {
  double p = 0.0;
  for (std::size_t i = 0; i < size(); ++i) {
    if (contains(poly, states()[i].position)) p += weights()[i];
  }
  return p;
}

Point2 Belief::mean() const {
  Point2 m{};
  for (std::size_t i = 0; i < size(); ++i) m = m + weights()[i] * states()[i].position;
  return m;
}

std::vector<BeliefPoint> Belief::snapshot(std::size_t max_points) const {
  std::vector<BeliefPoint> out;
  if (max_points == 0) return out;
  if (size() <= max_points) {
    for (std::size_t i = 0; i < size(); ++i) out.push_back({states()[i].position, states()[i].mode, weights()[i]});
    return out;
  }
  // Systematic selection with a fixed mid-stratum offset: deterministic.
  const double step = 1.0 / static_cast<double>(max_points);
  double u = 0.5 * step;
  double cum = weights()[0];
  std::size_t i = 0;
  for (std::size_t k = 0; k < max_points; ++k) {
    while (u > cum && i + 1 < size()) cum += weights()[++i];
    out.push_back({states()[i].position, states()[i].mode, step});
    u += step;
  }
  return out;
}

}  // namespace sketchsearch

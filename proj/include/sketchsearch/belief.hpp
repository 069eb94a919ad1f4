#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "sketchsearch/codebook.hpp"
#include "sketchsearch/error.hpp"
#include "sketchsearch/random.hpp"
#include "sketchsearch/world.hpp"

namespace sketchsearch {

double effective_sample_size(std::span<const double> weights);

/// Indices drawn by systematic resampling (one uniform offset, n strata).
std::vector<std::size_t> systematic_resample(std::span<const double> weights, std::size_t n, Rng& rng);

/// Weighted particle set with sequential importance resampling. State-agnostic
/// so toy models can exercise the same machinery as the target tracker.
template <class State>
class ParticleSet {
 public:
  ParticleSet() = default;
  ParticleSet(std::vector<State> states, std::vector<double> weights)
      : states_(std::move(states)), weights_(std::move(weights)) {
    if (states_.size() != weights_.size()) throw ConfigError("particle and weight counts differ");
    if (!normalize()) throw EmptyBelief("particle weights sum to zero");
  }

  std::size_t size() const { return states_.size(); }
  const std::vector<State>& states() const { return states_; }
  const std::vector<double>& weights() const { return weights_; }

  template <class F>
  void transform(F&& f) {
    for (auto& s : states_) s = f(s);
  }

  /// Multiplies weights by lik(state). Returns false, leaving the set
  /// untouched, when every product vanishes.
  template <class L>
  bool reweight(L&& lik) {
    scratch_.resize(states_.size());
    double total = 0.0;
    for (std::size_t i = 0; i < states_.size(); ++i) {
      scratch_[i] = weights_[i] * lik(states_[i]);
      total += scratch_[i];
    }
    if (!(total > kDegenerateMass)) return false;
    for (std::size_t i = 0; i < states_.size(); ++i) weights_[i] = scratch_[i] / total;
    return true;
  }

  void resample(Rng& rng) {
    const auto idx = systematic_resample(weights_, states_.size(), rng);
    std::vector<State> next;
    next.reserve(idx.size());
    for (auto i : idx) next.push_back(states_[i]);
    states_ = std::move(next);
    weights_.assign(states_.size(), 1.0 / static_cast<double>(states_.size()));
  }

  /// Resamples when the effective sample size falls below fraction * N.
  bool resample_if_needed(Rng& rng, double fraction = 0.5) {
    if (effective_sample_size(weights_) >= fraction * static_cast<double>(states_.size())) return false;
    resample(rng);
    return true;
  }

  static constexpr double kDegenerateMass = 1e-300;

 private:
  bool normalize() {
    double total = 0.0;
    for (double w : weights_) total += w;
    if (!(total > 0)) return false;
    for (double& w : weights_) w /= total;
    return true;
  }

  std::vector<State> states_;
  std::vector<double> weights_;
  std::vector<double> scratch_;
};

struct BeliefPoint {
  Point2 position;
  Mode mode;
  double weight;
};

/// Particle belief over target position and mode.
class Belief {
 public:
  Belief(std::vector<TargetState> states, std::vector<double> weights);

  /// Uniform over road length; each particle OnRoad with probability on_road.
  static Belief road_prior(const RoadNetwork& net, std::size_t n, double on_road, Rng& rng);

  std::size_t size() const { return set_.size(); }
  const std::vector<TargetState>& states() const { return set_.states(); }
  const std::vector<double>& weights() const { return set_.weights(); }
  /// Number of degenerate-weight reinitializations so far.
  int fallbacks() const { return fallbacks_; }

  void predict(const RoadNetwork& net, const TargetDynamics& dyn, const TerrainGrid& grid, double dt, Rng& rng);

  /// One robot observation taken from `robot`.
  void update_robot(RobotObs o, const RobotState& robot, const SensorModel& sensor, const RoadNetwork& net,
                    Rng& rng);
  /// One human answer to `query` under the assumed answer model.
  void update_human(HumanAnswer a, const Query& query, const Codebook& book, const AnswerModel& model,
                    const RoadNetwork& net, Rng& rng);
  /// Joint robot + human update (sensor and human conditionally independent).
  void weight_and_resample(RobotObs o_r, HumanAnswer o_h, const Query& query, const RobotState& robot,
                           const SensorModel& sensor, const Codebook& book, const AnswerModel& model,
                           const RoadNetwork& net, Rng& rng);
  /// Throws UnknownReference for unregistered labels.
  void fuse_statement(const Statement& st, const Codebook& book, double eta, const RoadNetwork& net, Rng& rng);

  double mode_probability(Mode m) const;
  double mass_in(const ConvexPolygon& poly) const;
  Point2 mean() const;
  /// At most max_points particles, picked deterministically by weight.
  std::vector<BeliefPoint> snapshot(std::size_t max_points = 500) const;

  /// Generic reweight hook with the same degenerate fallback as the named updates.
  template <class L>
  void reweight(L&& lik, const RoadNetwork& net, Rng& rng) {
    if (!set_.reweight(std::forward<L>(lik))) {
      reinitialize(net, rng);
      return;
    }
    set_.resample_if_needed(rng);
  }

  static constexpr double kFallbackOnRoad = 0.8;

 private:
  void reinitialize(const RoadNetwork& net, Rng& rng);

  ParticleSet<TargetState> set_;
  int fallbacks_ = 0;
};

}  // namespace sketchsearch

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "sketchsearch/belief.hpp"
#include "sketchsearch/codebook.hpp"
#include "sketchsearch/random.hpp"
#include "sketchsearch/world.hpp"

namespace sketchsearch {

struct ActionPair {
  int move = -1;  // destination node
  Query query;
  friend bool operator==(const ActionPair&, const ActionPair&) = default;
};

enum class PlannerMode { Plain, Blind, Predictive };
const char* planner_mode_name(PlannerMode m);
std::optional<PlannerMode> parse_planner_mode(const std::string& s);

struct PlannerConfig {
  double gamma = 0.95;
  double ucb_c = 50.0;
  int max_depth = 30;         // actions per simulation, tree plus rollout
  int rollout_depth = 8;      // actions per rollout
  double sims_per_second = 150.0;  // budget per second of robot motion
  int min_sims = 32;
  int branch_particles = 2000;  // particles carried into predictive branches
  PlannerMode mode = PlannerMode::Predictive;
  double plain_stall = 1.0;  // seconds the robot idles while a plain search runs
  int query_candidates = 4;  // non-null queries considered per search
};

/// Everything a simulation needs; fixed for the duration of one search.
struct GenerativeModel {
  const RoadNetwork* net = nullptr;
  const TerrainGrid* grid = nullptr;
  const Codebook* book = nullptr;
  TargetDynamics target;
  RobotDynamics robot;
  SensorModel sensor;
  AnswerModel human;  // assumed accuracy/availability
  bool human_present = true;
  double dt = 1.0;
  double t_max = 600.0;
};

struct SimState {
  TargetState target;
  RobotState robot;
  double clock = 0.0;
};

struct StepResult {
  double reward = 0.0;
  RobotObs robot_obs = RobotObs::None;  // strongest observation during the action
  HumanAnswer answer = HumanAnswer::Null;
  bool captured = false;
  bool timed_out = false;
};

/// Executes one action pair in simulation (mutates `s`).
StepResult simulate_action(const GenerativeModel& gen, SimState& s, const ActionPair& a, Rng& rng);

/// Root of a search: particles to sample from, the robot and the clock.
struct SearchRoot {
  const std::vector<TargetState>* particles = nullptr;
  const std::vector<double>* weights = nullptr;
  RobotState robot;
  double clock = 0.0;
};

struct RootStat {
  int move = -1;
  int visits = 0;
  double value = 0.0;
};

struct SearchResult {
  ActionPair action;
  double value = 0.0;
  int simulations = 0;
  std::vector<RootStat> moves;
};

/// Null plus the `query_candidates` queries whose answers are least
/// predictable under the root belief, in codebook order.
std::vector<Query> candidate_queries(const SearchRoot& root, const GenerativeModel& gen, const PlannerConfig& config);

/// Monte Carlo tree search over move x query pairs. Selection is factored:
/// UCB picks the move from move-level statistics, then the query from that
/// move's query statistics.
SearchResult search(const SearchRoot& root, const GenerativeModel& gen, const PlannerConfig& config, int budget,
                    Rng& rng);

/// Expected duration of moving the idle robot to `move`.
double action_duration(const RoadNetwork& net, const RobotDynamics& dyn, const RobotState& robot, int move);

/// Per-particle p(aggregated robot observation) along the nominal path of `move`.
struct BranchForecast {
  std::array<double, kRobotObsCount> probability{};
  std::array<std::vector<double>, kRobotObsCount> weights;  // branch posteriors over `states`
  std::vector<TargetState> states;                             // particles propagated over the action
  RobotState arrival;
  double duration = 0.0;
  int ticks = 0;
};

BranchForecast forecast_action(const Belief& b, const GenerativeModel& gen, const RobotState& robot, int move,
                               double clock, std::size_t max_particles, Rng& rng);

/// p(o | b, a) for the three robot observations; sums to one.
std::array<double, kRobotObsCount> observation_distribution(const Belief& b, const GenerativeModel& gen,
                                                            const RobotState& robot, const ActionPair& a,
                                                            double clock, Rng& rng);

/// Largest-remainder split of `total` simulations proportional to `p`.
std::array<int, kRobotObsCount> split_budget(const std::array<double, kRobotObsCount>& p, int total);

/// Plans made during an action for use on arrival.
struct PredictivePlan {
  std::array<std::optional<SearchResult>, kRobotObsCount> branch;  // Predictive: per observation
  std::optional<SearchResult> blind;                               // Blind: single plan
  std::array<double, kRobotObsCount> probability{};
  std::array<int, kRobotObsCount> budget{};
  double duration = 0.0;
};

/// For each robot observation, conditions the propagated belief on it and
/// searches with a budget proportional to its probability. Blind mode runs a
/// single search on the unconditioned propagation.
PredictivePlan predictive_plan(const Belief& b, const GenerativeModel& gen, const PlannerConfig& config,
                               const RobotState& robot, const ActionPair& current, double clock, Rng& rng);

}  // namespace sketchsearch

#pragma once
// Scripted detect-on-arrival scenario. The robot drives west-to-centre on a
// plus-shaped road graph. A minority hypothesis sits just east of the centre,
// where the drive ends in the detection band. The majority hypothesis sits
// south, out of view. A predictive planner has a Detected branch ready on
// arrival. A blind planner's arrival plan ignores what was seen, so it only
// reacts at the decision after.

#include "sketchsearch/planner.hpp"

namespace scenario {

using namespace sketchsearch;

struct DetectOutcome {
  int predictive_move = -1;  // Detected branch, executed on arrival
  int blind_move = -1;       // blind plan, executed on arrival
  int blind_next_move = -1;  // blind's following decision, after filtering the detection
  int east = 1;
  int south = 4;
  double p_detected = 0.0;
};

inline DetectOutcome detect_on_arrival(std::uint64_t seed, int sims_per_second = 200) {
  const RoadNetwork net({{500, 500}, {650, 500}, {350, 500}, {500, 650}, {500, 350}},
                        {{0, 1}, {0, 2}, {0, 3}, {0, 4}}, {});
  const TerrainGrid grid;
  const Codebook book;
  GenerativeModel gen;
  gen.net = &net;
  gen.grid = &grid;
  gen.book = &book;
  gen.target.road_speed = gen.target.road_sd = gen.target.offroad_speed = gen.target.offroad_sd = 0.0;
  gen.target.stay_probability = 1.0;
  gen.robot.sd = 0.0;
  gen.human_present = false;
  gen.t_max = 600.0;

  auto parked = [](Point2 p) {
    TargetState t;
    t.position = p;
    t.mode = Mode::OffRoad;
    return t;
  };
  std::vector<TargetState> states;
  std::vector<double> weights;
  for (int i = 0; i < 20; ++i) {
    states.push_back(parked({620.0, 495.0 + 0.5 * i}));
    weights.push_back(0.25 / 20);
    states.push_back(parked({495.0 + 0.5 * i, 300.0}));
    weights.push_back(0.75 / 20);
  }
  const Belief belief(states, weights);
  const RobotState robot = robot_at(net, 2, 0.0);
  const ActionPair current{0, {}};

  PlannerConfig cfg;
  cfg.sims_per_second = sims_per_second;
  Rng rng(seed);
  DetectOutcome out;

  cfg.mode = PlannerMode::Predictive;
  const auto plan = predictive_plan(belief, gen, cfg, robot, current, 0.0, rng);
  out.p_detected = plan.probability[static_cast<std::size_t>(RobotObs::Detected)];
  if (const auto& br = plan.branch[static_cast<std::size_t>(RobotObs::Detected)]) out.predictive_move = br->action.move;

  cfg.mode = PlannerMode::Blind;
  const auto blind = predictive_plan(belief, gen, cfg, robot, current, 0.0, rng);
  if (blind.blind) out.blind_move = blind.blind->action.move;

  // Blind's next decision sees the filtered detection.
  const auto f = forecast_action(belief, gen, robot, current.move, 0.0, belief.size(), rng);
  const auto& w = f.weights[static_cast<std::size_t>(RobotObs::Detected)];
  const auto next = search(SearchRoot{&f.states, &w, f.arrival, f.duration}, gen, cfg,
                           static_cast<int>(sims_per_second * 10), rng);
  out.blind_next_move = next.action.move;
  return out;
}

}  // namespace scenario

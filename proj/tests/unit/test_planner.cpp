#include <doctest.h>

#include <cmath>
#include <numbers>

#include "sketchsearch/error.hpp"
#include "sketchsearch/planner.hpp"

using namespace sketchsearch;

namespace {

TargetDynamics frozen() {
  TargetDynamics d;
  d.road_speed = d.road_sd = d.offroad_speed = d.offroad_sd = 0.0;
  d.stay_probability = 1.0;
  return d;
}

struct Fixture {
  RoadNetwork net;
  TerrainGrid grid;
  Codebook book;
  GenerativeModel gen;

  explicit Fixture(RoadNetwork n, bool human = false) : net(std::move(n)) {
    gen.net = &net;
    gen.grid = &grid;
    gen.book = &book;
    gen.target = frozen();
    gen.robot.sd = 0.0;
    gen.human_present = human;
    gen.t_max = 1e9;
  }
};

TargetState point_target(Point2 p) {
  TargetState t;
  t.position = p;
  t.mode = Mode::OffRoad;
  return t;
}

// Plus-shaped graph: centre 0 with arms east, west, north, south.
RoadNetwork plus_map() {
  return RoadNetwork({{500, 500}, {650, 500}, {350, 500}, {500, 650}, {500, 350}}, {{0, 1}, {0, 2}, {0, 3}, {0, 4}},
                     {});
}

// Independent capture probability along a straight-line path through
// `waypoints` at `speed` m/s, one look per second, static target.
double path_capture(const std::vector<Point2>& waypoints, Point2 target, double speed, const SensorModel& s) {
  double miss = 1.0;
  for (std::size_t k = 1; k < waypoints.size(); ++k) {
    const Point2 a = waypoints[k - 1];
    const Point2 b = waypoints[k];
    const double len = distance(a, b);
    const double heading = std::atan2(b.y - a.y, b.x - a.x);
    const int ticks = static_cast<int>(std::ceil(len / speed - 1e-9));
    for (int i = 1; i <= ticks; ++i) {
      const double f = std::min(1.0, i * speed / len);
      const Point2 p = a + f * (b - a);
      const double bearing = std::atan2(target.y - p.y, target.x - p.x);
      const double off = std::abs(std::remainder(bearing - heading, 2 * std::numbers::pi));
      const double d = distance(p, target);
      if (d <= s.tau && (off <= s.half_cone || d == 0.0)) miss *= 1.0 - s.accuracy;
    }
  }
  return 1.0 - miss;
}

}  // namespace

TEST_SUITE("planner") {
  TEST_CASE("known target: search agrees with an exhaustive two-step lookahead") {
    Fixture f(plus_map());
    const Point2 target = f.net.node(1);
    const std::vector<TargetState> particles{point_target(target)};
    const std::vector<double> weights{1.0};
    PlannerConfig cfg;
    Rng rng(3);
    for (int start : {3, 2, 4}) {
      // Oracle: value of each first move under the best second move.
      int best_move = -1;
      double best_value = -1.0;
      for (int m1 : f.net.legal_moves(start)) {
        std::vector<Point2> leg1{f.net.node(start)};
        for (int n : f.net.route(start, m1)) leg1.push_back(f.net.node(n));
        const double q1 = path_capture(leg1, target, f.gen.robot.speed, f.gen.sensor);
        double q2best = 0.0;
        for (int m2 : f.net.legal_moves(m1)) {
          std::vector<Point2> leg2{f.net.node(m1)};
          for (int n : f.net.route(m1, m2)) leg2.push_back(f.net.node(n));
          q2best = std::max(q2best, path_capture(leg2, target, f.gen.robot.speed, f.gen.sensor));
        }
        const double v = 100.0 * (q1 + cfg.gamma * (1.0 - q1) * q2best);
        if (v > best_value) {
          best_value = v;
          best_move = m1;
        }
      }
      REQUIRE(best_move == 1);
      const auto res = search(SearchRoot{&particles, &weights, robot_at(f.net, start), 0.0}, f.gen, cfg, 2000, rng);
      CHECK(res.action.move == best_move);
      CHECK(res.action.query.is_null());
      const auto& moves = f.net.legal_moves(start);
      CHECK(std::find(moves.begin(), moves.end(), res.action.move) != moves.end());
    }
  }

  TEST_CASE("Null is chosen when every query is uninformative") {
    Fixture f(plus_map(), true);
    f.book.add(build_sketch("Far", {{880, 880}, {950, 880}, {950, 950}, {880, 950}}, std::nullopt));
    const std::vector<TargetState> particles{point_target(f.net.node(1))};
    const std::vector<double> weights{1.0};
    PlannerConfig cfg;
    Rng rng(8);
    const auto res = search(SearchRoot{&particles, &weights, robot_at(f.net, 3), 0.0}, f.gen, cfg, 5000, rng);
    CHECK(res.action.query.is_null());
  }

  TEST_CASE("search value matches the analytic value of a two-node chain") {
    // Robot shuttles between two nodes; a static target sits beyond node 1.
    // Each eastbound leg has two looks inside the capture radius and the
    // westbound leg none, so V = 100 q sum_k (gamma^2 (1-q))^k with
    // q = 1 - (1 - a)^2, truncated at the depth cap.
    Fixture f(RoadNetwork({{100, 500}, {250, 500}}, {{0, 1}}, {}));
    f.gen.sensor.accuracy = 0.1;
    const std::vector<TargetState> particles{point_target({305, 500})};
    const std::vector<double> weights{1.0};
    PlannerConfig cfg;
    cfg.rollout_depth = cfg.max_depth;
    const double q = 1.0 - 0.9 * 0.9;
    const double x = cfg.gamma * cfg.gamma * (1.0 - q);
    const int legs = cfg.max_depth / 2;
    const double analytic = 100.0 * q * (1.0 - std::pow(x, legs)) / (1.0 - x);
    Rng rng(2);
    const auto res = search(SearchRoot{&particles, &weights, robot_at(f.net, 0), 0.0}, f.gen, cfg, 100000, rng);
    CHECK(res.action.move == 1);
    CHECK(res.value == doctest::Approx(analytic).epsilon(0.05));
  }

  TEST_CASE("search errors") {
    Fixture f(plus_map());
    const std::vector<TargetState> none;
    const std::vector<double> no_weights;
    Rng rng(1);
    CHECK_THROWS_AS(search(SearchRoot{&none, &no_weights, robot_at(f.net, 0), 0.0}, f.gen, PlannerConfig{}, 10, rng),
                    EmptyBelief);
    const std::vector<TargetState> one{point_target({0, 0})};
    const std::vector<double> w{1.0};
    RobotState moving = step_robot(f.net, f.gen.robot, robot_at(f.net, 0), 1, 1.0, rng);
    CHECK_THROWS_AS(search(SearchRoot{&one, &w, moving, 0.0}, f.gen, PlannerConfig{}, 10, rng), IllegalMove);
  }

  TEST_CASE("query candidates favour uncertain answers") {
    Fixture f(plus_map(), true);
    f.book.add(build_sketch("Mid", {{450, 450}, {550, 450}, {550, 550}, {450, 550}}, std::nullopt));
    f.book.add(build_sketch("Far", {{470, 900}, {530, 900}, {530, 960}, {470, 960}}, std::nullopt));
    // Half the mass east of Mid, half west: E/W about Mid are coin flips.
    const std::vector<TargetState> particles{point_target({800, 500}), point_target({200, 500})};
    const std::vector<double> weights{0.5, 0.5};
    PlannerConfig cfg;
    cfg.query_candidates = 2;
    const auto qs = candidate_queries(SearchRoot{&particles, &weights, robot_at(f.net, 0), 0.0}, f.gen, cfg);
    REQUIRE(qs.size() == 3);
    CHECK(qs[0].is_null());
    for (std::size_t i = 1; i < qs.size(); ++i) {
      CHECK(qs[i].sketch == 0);
      CHECK((qs[i].relation == Relation::E || qs[i].relation == Relation::W));
    }
    cfg.query_candidates = 100;
    CHECK(candidate_queries(SearchRoot{&particles, &weights, robot_at(f.net, 0), 0.0}, f.gen, cfg).size() ==
          f.book.queries().size());
    f.gen.human_present = false;
    CHECK(candidate_queries(SearchRoot{&particles, &weights, robot_at(f.net, 0), 0.0}, f.gen, cfg).size() == 1);
  }

  TEST_CASE("observation distribution") {
    Fixture f(RoadNetwork({{100, 500}, {250, 500}, {100, 900}}, {{0, 1}, {0, 2}}, {}));
    Rng rng(4);
    const RobotState robot = robot_at(f.net, 0);

    SUBCASE("mass far from the path and outside the cone sees nothing") {
      const Belief b({point_target({900, 100}), point_target({950, 150})}, {0.5, 0.5});
      const auto p = observation_distribution(b, f.gen, robot, {1, {}}, 0.0, rng);
      CHECK(p[0] == 1.0);
      CHECK(p[1] == 0.0);
      CHECK(p[2] == 0.0);
    }
    SUBCASE("half the mass reaches the capture band at the last look") {
      // Static target 70 m past node 1, another one behind the robot.
      const Belief b({point_target({320, 500}), point_target({20, 500})}, {0.5, 0.5});
      const auto p = observation_distribution(b, f.gen, robot, {1, {}}, 0.0, rng);
      // Nine earlier looks with the target in the cone: each 1% false capture.
      const double ahead = 1.0 - 0.02 * std::pow(0.99, 9);
      CHECK(p[2] == doctest::Approx(0.5 * ahead).epsilon(1e-9));
      CHECK(p[0] + p[1] + p[2] == doctest::Approx(1.0).epsilon(1e-12));
    }
  }

  TEST_CASE("budget split") {
    CHECK(split_budget({0.9, 0.1, 0.0}, 10) == std::array<int, 3>{9, 1, 0});
    CHECK(split_budget({0.0, 0.0, 1.0}, 37) == std::array<int, 3>{0, 0, 37});
    CHECK(split_budget({1.0 / 3, 1.0 / 3, 1.0 / 3}, 10)[0] + split_budget({1.0 / 3, 1.0 / 3, 1.0 / 3}, 10)[1] +
              split_budget({1.0 / 3, 1.0 / 3, 1.0 / 3}, 10)[2] ==
          10);
    Rng rng(5);
    for (int i = 0; i < 200; ++i) {
      std::array<double, 3> p{uniform01(rng), uniform01(rng), uniform01(rng)};
      const double s = p[0] + p[1] + p[2];
      for (auto& v : p) v /= s;
      const int total = 1 + static_cast<int>(uniform01(rng) * 500);
      const auto b = split_budget(p, total);
      CHECK(b[0] + b[1] + b[2] == total);
      for (int o = 0; o < 3; ++o) CHECK(std::abs(b[o] - p[o] * total) < 1.0);
    }
  }

  TEST_CASE("predictive plans split the action's simulation budget") {
    auto net = RoadNetwork::default_map();
    Fixture f(net);
    f.gen.target = TargetDynamics{};
    Rng rng(6);
    const Belief b = Belief::road_prior(f.net, 2000, 1.0, rng);
    PlannerConfig cfg;
    cfg.sims_per_second = 10.0;
    const RobotState robot = robot_at(f.net, 14);
    const ActionPair a{f.net.legal_moves(14).front(), {}};
    const auto plan = predictive_plan(b, f.gen, cfg, robot, a, 0.0, rng);
    const int total = plan.budget[0] + plan.budget[1] + plan.budget[2];
    CHECK(std::abs(total - cfg.sims_per_second * plan.duration) <= 1.0);
    for (int o = 0; o < 3; ++o) {
      if (plan.budget[o] > 0) {
        REQUIRE(plan.branch[o]);
        CHECK(plan.branch[o]->simulations == plan.budget[o]);
      }
    }
    CHECK_FALSE(plan.blind);

    cfg.mode = PlannerMode::Blind;
    const auto blind = predictive_plan(b, f.gen, cfg, robot, a, 0.0, rng);
    CHECK(blind.blind);
    for (const auto& br : blind.branch) CHECK_FALSE(br);
    cfg.mode = PlannerMode::Plain;
    const auto plain = predictive_plan(b, f.gen, cfg, robot, a, 0.0, rng);
    CHECK_FALSE(plain.blind);
  }

  TEST_CASE("returned queries always belong to the current codebook") {
    auto net = RoadNetwork::default_map();
    Fixture f(net, true);
    Rng rng(7);
    const Belief b = Belief::road_prior(f.net, 1000, 1.0, rng);
    PlannerConfig cfg;
    for (int k = 0; k < 4; ++k) {
      const auto res =
          search(SearchRoot{&b.states(), &b.weights(), robot_at(f.net, 14), 0.0}, f.gen, cfg, 300, rng);
      const auto& qs = f.book.queries();
      CHECK(std::find(qs.begin(), qs.end(), res.action.query) != qs.end());
      const Point2 c{200.0 + 150.0 * k, 300.0 + 100.0 * k};
      f.book.add(build_sketch("S" + std::to_string(k),
                              {c + Point2{-40, -40}, c + Point2{40, -40}, c + Point2{40, 40}, c + Point2{-40, 40}},
                              std::nullopt));
      CHECK(f.book.queries().size() == 1 + 5 * static_cast<std::size_t>(k + 1));
    }
  }

  TEST_CASE("simulated actions respect the reward table") {
    Fixture f(RoadNetwork({{100, 500}, {250, 500}}, {{0, 1}}, {}), true);
    f.book.add(build_sketch("Pond", {{800, 800}, {850, 800}, {850, 850}, {800, 850}}, std::nullopt));
    Rng rng(9);
    SimState s{point_target({900, 100}), robot_at(f.net, 0), 0.0};
    const auto r = simulate_action(f.gen, s, {1, f.book.queries()[1]}, rng);
    CHECK(r.reward == -1.0);
    CHECK_FALSE(r.captured);
    CHECK(s.robot.node == 1);
    SimState t{point_target({900, 100}), robot_at(f.net, 0), 0.0};
    CHECK(simulate_action(f.gen, t, {1, {}}, rng).reward == 0.0);
    f.gen.sensor.accuracy = 1.0;
    SimState u{point_target({240, 500}), robot_at(f.net, 0), 0.0};
    const auto c = simulate_action(f.gen, u, {1, f.book.queries()[1]}, rng);
    CHECK(c.captured);
    CHECK(c.reward == 100.0);
  }
}

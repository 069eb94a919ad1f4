#include "sketchsearch/planner.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "sketchsearch/error.hpp"

namespace sketchsearch {

const char* planner_mode_name(PlannerMode m) {
  switch (m) {
    case PlannerMode::Plain: return "plain";
    case PlannerMode::Blind: return "blind";
    case PlannerMode::Predictive: return "predictive";
  }
  return "?";
}

std::optional<PlannerMode> parse_planner_mode(const std::string& s) {
  if (s == "plain") return PlannerMode::Plain;
  if (s == "blind") return PlannerMode::Blind;
  if (s == "predictive") return PlannerMode::Predictive;
  return std::nullopt;
}

namespace {

RobotObs sample_obs(const std::array<double, kRobotObsCount>& p, Rng& rng) {
  const double u = uniform01(rng);
  if (u < p[0]) return RobotObs::None;
  if (u < p[0] + p[1]) return RobotObs::Detected;
  return RobotObs::Captured;
}

HumanAnswer sample_answer(const GenerativeModel& gen, const Query& q, const TargetState& s, Rng& rng) {
  if (q.is_null() || !gen.human_present) return HumanAnswer::Null;
  const double u = uniform01(rng);
  if (u >= gen.human.xi) return HumanAnswer::Null;
  const double yes = corrupt_yes(query_truth(*gen.book, q, s), gen.human.eta);
  return uniform01(rng) < yes ? HumanAnswer::Yes : HumanAnswer::No;
}

}  // namespace

StepResult simulate_action(const GenerativeModel& gen, SimState& s, const ActionPair& a, Rng& rng) {
  StepResult out;
  const RoadNetwork& net = *gen.net;
  // Validates legality (throws IllegalMove) without advancing time.
  s.robot = step_robot(net, gen.robot, s.robot, a.move, 0.0, rng);
  while (!s.robot.idle()) {
    if (s.clock >= gen.t_max) {
      out.timed_out = true;
      break;
    }
    s.target = step_target(net, gen.target, *gen.grid, s.target, gen.dt, rng);
    s.robot = step_robot(net, gen.robot, s.robot, a.move, gen.dt, rng);
    s.clock += gen.dt;
    const auto lik = sense_likelihood(gen.sensor, s.robot.position, s.robot.heading, s.target.position);
    const RobotObs o = sample_obs(lik, rng);
    if (o == RobotObs::Captured && distance(s.robot.position, s.target.position) <= gen.sensor.tau) {
      out.captured = true;
      out.robot_obs = o;
      out.reward = 100.0;
      return out;
    }
    out.robot_obs = std::max(out.robot_obs, o);
  }
  if (!a.query.is_null()) {
    out.reward -= 1.0;
    out.answer = sample_answer(gen, a.query, s.target, rng);
  }
  return out;
}

namespace {

struct QStat {
  int n = 0;
  double q = 0.0;
  std::array<int, kRobotObsCount * kHumanAnswerCount> child;
  QStat() { child.fill(-1); }
};

struct MoveStat {
  int n = 0;
  double q = 0.0;
};

struct VNode {
  int robot_node = 0;
  int n = 0;
  std::size_t move_begin = 0;
  std::size_t query_begin = 0;
  int moves = 0;
};

class Tree {
 public:
  Tree(const GenerativeModel& gen, const PlannerConfig& cfg, std::vector<Query> queries, Rng& rng)
      : gen_(gen), cfg_(cfg), rng_(rng), queries_(std::move(queries)) {}

  int add_node(int robot_node) {
    VNode v;
    v.robot_node = robot_node;
    v.moves = static_cast<int>(gen_.net->legal_moves(robot_node).size());
    v.move_begin = moves_.size();
    v.query_begin = qstats_.size();
    moves_.resize(moves_.size() + static_cast<std::size_t>(v.moves));
    qstats_.resize(qstats_.size() + static_cast<std::size_t>(v.moves) * queries_.size());
    nodes_.push_back(v);
    return static_cast<int>(nodes_.size() - 1);
  }

  double simulate(SimState& s, int vi, int depth) {
    if (depth >= cfg_.max_depth || s.clock >= gen_.t_max) return 0.0;
    const VNode v = nodes_[static_cast<std::size_t>(vi)];
    if (v.moves == 0) return 0.0;
    const int m = select(&moves_[v.move_begin], v.moves, v.n);
    const std::size_t qb = v.query_begin + static_cast<std::size_t>(m) * queries_.size();
    const int qi = select(&qstats_[qb], static_cast<int>(queries_.size()), moves_[v.move_begin + static_cast<std::size_t>(m)].n);

    const ActionPair a{gen_.net->legal_moves(v.robot_node)[static_cast<std::size_t>(m)], queries_[static_cast<std::size_t>(qi)]};
    const StepResult r = simulate_action(gen_, s, a, rng_);
    double ret = r.reward;
    if (!r.captured && !r.timed_out) {
      const auto key = static_cast<std::size_t>(r.robot_obs) * kHumanAnswerCount + static_cast<std::size_t>(r.answer);
      int child = qstats_[qb + static_cast<std::size_t>(qi)].child[key];
      if (child < 0) {
        child = add_node(a.move);
        qstats_[qb + static_cast<std::size_t>(qi)].child[key] = child;
        ret += cfg_.gamma * rollout(s, depth + 1);
      } else {
        ret += cfg_.gamma * simulate(s, child, depth + 1);
      }
    }
    auto& ms = moves_[v.move_begin + static_cast<std::size_t>(m)];
    ms.n += 1;
    ms.q += (ret - ms.q) / ms.n;
    auto& qs = qstats_[qb + static_cast<std::size_t>(qi)];
    qs.n += 1;
    qs.q += (ret - qs.q) / qs.n;
    nodes_[static_cast<std::size_t>(vi)].n += 1;
    return ret;
  }

  double rollout(SimState& s, int depth) {
    double ret = 0.0;
    double discount = 1.0;
    const int stop = std::min(cfg_.max_depth, depth + cfg_.rollout_depth);
    for (int d = depth; d < stop && s.clock < gen_.t_max; ++d) {
      const auto& mv = gen_.net->legal_moves(s.robot.node);
      if (mv.empty()) break;
      const auto k = std::min(mv.size() - 1, static_cast<std::size_t>(uniform01(rng_) * static_cast<double>(mv.size())));
      const StepResult r = simulate_action(gen_, s, ActionPair{mv[k], {}}, rng_);
      ret += discount * r.reward;
      if (r.captured || r.timed_out) break;
      discount *= cfg_.gamma;
    }
    return ret;
  }

  SearchResult result(int root) const {
    SearchResult out;
    const VNode& v = nodes_[static_cast<std::size_t>(root)];
    const auto& legal = gen_.net->legal_moves(v.robot_node);
    int best_m = -1;
    for (int m = 0; m < v.moves; ++m) {
      const auto& ms = moves_[v.move_begin + static_cast<std::size_t>(m)];
      out.moves.push_back({legal[static_cast<std::size_t>(m)], ms.n, ms.q});
      if (ms.n > 0 && (best_m < 0 || ms.q > moves_[v.move_begin + static_cast<std::size_t>(best_m)].q)) best_m = m;
    }
    if (best_m < 0) best_m = 0;
    const std::size_t qb = v.query_begin + static_cast<std::size_t>(best_m) * queries_.size();
    int best_q = 0;
    for (int q = 0; q < static_cast<int>(queries_.size()); ++q) {
      const auto& qs = qstats_[qb + static_cast<std::size_t>(q)];
      const auto& bq = qstats_[qb + static_cast<std::size_t>(best_q)];
      if (qs.n > 0 && (bq.n == 0 || qs.q > bq.q)) best_q = q;
    }
    out.action = {legal[static_cast<std::size_t>(best_m)], queries_[static_cast<std::size_t>(best_q)]};
    out.value = moves_[v.move_begin + static_cast<std::size_t>(best_m)].q;
    out.simulations = v.n;
    return out;
  }

 private:
  template <class Stat>
  int select(const Stat* stats, int count, int parent_n) const {
    for (int i = 0; i < count; ++i) {
      if (stats[i].n == 0) return i;
    }
    const double log_n = std::log(static_cast<double>(std::max(parent_n, 1)));
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (int i = 0; i < count; ++i) {
      const double score = stats[i].q + cfg_.ucb_c * std::sqrt(log_n / stats[i].n);
      if (score > best_score) {
        best_score = score;
        best = i;
      }
    }
    return best;
  }

  const GenerativeModel& gen_;
  const PlannerConfig& cfg_;
  Rng& rng_;
  std::vector<Query> queries_;
  std::vector<VNode> nodes_;
  std::vector<MoveStat> moves_;
  std::vector<QStat> qstats_;
};

double binary_entropy(double p) {
  if (p <= 0.0 || p >= 1.0) return 0.0;
  return -p * std::log(p) - (1.0 - p) * std::log(1.0 - p);
}

}  // namespace

std::vector<Query> candidate_queries(const SearchRoot& root, const GenerativeModel& gen, const PlannerConfig& config) {
  std::vector<Query> out{Query{}};
  if (!gen.human_present || gen.book == nullptr) return out;
  const auto& all = gen.book->queries();
  const auto limit = static_cast<std::size_t>(std::max(config.query_candidates, 0));
  if (all.size() <= limit + 1) return all;
  if (limit == 0) return out;

  // Deterministic stratified subsample of the root belief.
  const auto& states = *root.particles;
  const auto& w = *root.weights;
  const std::size_t n = std::min<std::size_t>(states.size(), 500);
  const double total = std::accumulate(w.begin(), w.end(), 0.0);
  std::vector<std::size_t> sample;
  sample.reserve(n);
  const double step = total / static_cast<double>(n);
  double u = 0.5 * step;
  double cum = w[0];
  std::size_t i = 0;
  for (std::size_t k = 0; k < n; ++k) {
    while (u > cum && i + 1 < w.size()) cum += w[++i];
    sample.push_back(i);
    u += step;
  }

  std::vector<std::pair<double, std::size_t>> scored;
  for (std::size_t qi = 0; qi < all.size(); ++qi) {
    if (all[qi].is_null()) continue;
    double yes = 0.0;
    for (auto k : sample) yes += corrupt_yes(query_truth(*gen.book, all[qi], states[k]), gen.human.eta);
    scored.emplace_back(binary_entropy(yes / static_cast<double>(n)), qi);
  }
  std::stable_sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  scored.resize(std::min(limit, scored.size()));
  std::sort(scored.begin(), scored.end(), [](const auto& a, const auto& b) { return a.second < b.second; });
  for (const auto& [h, qi] : scored) out.push_back(all[qi]);
  return out;
}

SearchResult search(const SearchRoot& root, const GenerativeModel& gen, const PlannerConfig& config, int budget,
                    Rng& rng) {
  if (root.particles == nullptr || root.weights == nullptr || root.particles->empty()) {
    throw EmptyBelief("search needs a non-empty belief");
  }
  if (!root.robot.idle()) throw IllegalMove("search root robot must be at a node");
  const auto& w = *root.weights;
  std::vector<double> cumulative(w.size());
  std::partial_sum(w.begin(), w.end(), cumulative.begin());
  const double total = cumulative.back();
  if (!(total > 0)) throw EmptyBelief("search belief has zero weight");

  Tree tree(gen, config, candidate_queries(root, gen, config), rng);
  const int r = tree.add_node(root.robot.node);
  for (int i = 0; i < std::max(budget, 1); ++i) {
    const double u = uniform01(rng) * total;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    if (it == cumulative.end()) --it;
    SimState s{(*root.particles)[static_cast<std::size_t>(it - cumulative.begin())], root.robot, root.clock};
    tree.simulate(s, r, 0);
  }
  return tree.result(r);
}

double action_duration(const RoadNetwork& net, const RobotDynamics& dyn, const RobotState& robot, int move) {
  return net.route_length(robot.node, move) / dyn.speed;
}

BranchForecast forecast_action(const Belief& b, const GenerativeModel& gen, const RobotState& robot, int move,
                               double clock, std::size_t max_particles, Rng& rng) {
  BranchForecast f;
  const RoadNetwork& net = *gen.net;
  // Nominal (noise-free) robot path.
  std::vector<ViewCone> path;
  RobotDynamics nominal = gen.robot;
  nominal.sd = 0.0;
  RobotState r = step_robot(net, nominal, robot, move, 0.0, rng);
  double t = clock;
  while (!r.idle() && t < gen.t_max) {
    r = step_robot(net, nominal, r, move, gen.dt, rng);
    t += gen.dt;
    path.emplace_back(gen.sensor, r.position, r.heading);
  }
  f.arrival = r;
  f.arrival.route.clear();
  f.arrival.position = net.node(move);
  f.arrival.node = move;
  f.ticks = static_cast<int>(path.size());
  f.duration = static_cast<double>(path.size()) * gen.dt;

  std::vector<double> prior;
  if (b.size() > max_particles) {
    for (auto i : systematic_resample(b.weights(), max_particles, rng)) f.states.push_back(b.states()[i]);
    prior.assign(f.states.size(), 1.0 / static_cast<double>(f.states.size()));
  } else {
    f.states = b.states();
    prior = b.weights();
  }
  const std::size_t n = f.states.size();
  for (auto& w : f.weights) w.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    TargetState s = f.states[i];
    double none = 1.0;
    double no_capture = 1.0;
    for (const auto& cone : path) {
      s = step_target(net, gen.target, *gen.grid, s, gen.dt, rng);
      const auto lik = sense_likelihood(cone, s.position);
      none *= lik[0];
      no_capture *= 1.0 - lik[2];
    }
    f.states[i] = s;
    const std::array<double, kRobotObsCount> p{none, std::max(0.0, no_capture - none), 1.0 - no_capture};
    for (std::size_t o = 0; o < kRobotObsCount; ++o) {
      f.weights[o][i] = prior[i] * p[o];
      f.probability[o] += f.weights[o][i];
    }
  }
  for (std::size_t o = 0; o < kRobotObsCount; ++o) {
    if (f.probability[o] > 0) {
      for (auto& w : f.weights[o]) w /= f.probability[o];
    }
  }
  const double total = f.probability[0] + f.probability[1] + f.probability[2];
  for (auto& p : f.probability) p /= total;
  return f;
}

std::array<double, kRobotObsCount> observation_distribution(const Belief& b, const GenerativeModel& gen,
                                                            const RobotState& robot, const ActionPair& a,
                                                            double clock, Rng& rng) {
  return forecast_action(b, gen, robot, a.move, clock, b.size(), rng).probability;
}

std::array<int, kRobotObsCount> split_budget(const std::array<double, kRobotObsCount>& p, int total) {
  std::array<int, kRobotObsCount> out{};
  std::array<double, kRobotObsCount> rem{};
  int used = 0;
  for (std::size_t o = 0; o < kRobotObsCount; ++o) {
    const double exact = p[o] * total;
    out[o] = static_cast<int>(std::floor(exact));
    rem[o] = exact - out[o];
    used += out[o];
  }
  while (used < total) {
    std::size_t best = 0;
    for (std::size_t o = 1; o < kRobotObsCount; ++o) {
      if (rem[o] > rem[best]) best = o;
    }
    ++out[best];
    rem[best] = -1.0;
    ++used;
  }
  return out;
}

PredictivePlan predictive_plan(const Belief& b, const GenerativeModel& gen, const PlannerConfig& config,
                               const RobotState& robot, const ActionPair& current, double clock, Rng& rng) {
  PredictivePlan plan;
  if (config.mode == PlannerMode::Plain) return plan;
  BranchForecast f = forecast_action(b, gen, robot, current.move, clock,
                                     static_cast<std::size_t>(config.branch_particles), rng);
  plan.duration = f.duration;
  plan.probability = f.probability;
  const int total = std::max(config.min_sims, static_cast<int>(std::lround(config.sims_per_second * f.duration)));
  const double arrival_clock = clock + f.duration;
  if (arrival_clock >= gen.t_max) return plan;
  if (config.mode == PlannerMode::Blind) {
    std::vector<double> w(f.states.size(), 0.0);
    for (std::size_t o = 0; o < kRobotObsCount; ++o) {
      for (std::size_t i = 0; i < w.size(); ++i) w[i] += f.probability[o] * f.weights[o][i];
    }
    plan.budget = {total, 0, 0};
    plan.blind = search(SearchRoot{&f.states, &w, f.arrival, arrival_clock}, gen, config, total, rng);
    return plan;
  }
  plan.budget = split_budget(f.probability, total);
  for (std::size_t o = 0; o < kRobotObsCount; ++o) {
    if (plan.budget[o] <= 0 || !(f.probability[o] > 0)) continue;
    plan.branch[o] = search(SearchRoot{&f.states, &f.weights[o], f.arrival, arrival_clock}, gen, config,
                            plan.budget[o], rng);
  }
  return plan;
}

}  // namespace sketchsearch

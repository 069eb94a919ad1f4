#include "sketchsearch/episode.hpp"

#include <cmath>
#include <numbers>
#include <ostream>
#include <sstream>

#include "sketchsearch/error.hpp"

namespace sketchsearch {

using nlohmann::json;

namespace {

// Streams drawn from the episode seed; one per stochastic component.
enum Stream : std::uint64_t {
  kTargetStream = 1,
  kRobotStream,
  kSensorStream,
  kFilterStream,
  kPlannerStream,
  kGlimpseStream,
  kSketchStream,
  kAnswerStream,
  kStatementStream,
  kStartStream,
};

constexpr double kNominalDecisionSeconds = 10.0;

json period(double v) { return std::isfinite(v) ? json(v) : json("inf"); }

double read_period(const json& j, const char* key, double fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (v.is_null() || (v.is_string() && (v == "inf" || v == "never"))) return kNever;
  if (!v.is_number()) throw ConfigError(std::string("'") + key + "' must be a number or \"inf\"");
  return v.get<double>();
}

template <class T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

const char* source_name(HumanSource s) {
  switch (s) {
    case HumanSource::None: return "none";
    case HumanSource::Simulated: return "simulated";
    case HumanSource::Live: return "live";
  }
  return "?";
}

json point_list(const std::vector<Point2>& pts) {
  json a = json::array();
  for (const auto& p : pts) a.push_back({p.x, p.y});
  return a;
}

std::vector<Point2> read_points_json(const json& a) {
  std::vector<Point2> pts;
  for (const auto& p : a) pts.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
  return pts;
}

}  // namespace

void to_json(json& j, const EpisodeConfig& c) {
  j = json{
      {"seed", c.seed},
      {"map", c.map},
      {"t_max", c.t_max},
      {"dt", c.dt},
      {"particles", c.particles},
      {"target",
       {{"road_speed", c.target.road_speed},
        {"road_sd", c.target.road_sd},
        {"offroad_speed", c.target.offroad_speed},
        {"offroad_sd", c.target.offroad_sd},
        {"stay_probability", c.target.stay_probability},
        {"heading_sd", c.target.heading_sd}}},
      {"robot", {{"speed", c.robot.speed}, {"sd", c.robot.sd}}},
      {"sensor",
       {{"tau", c.sensor.tau},
        {"cone_deg", 2.0 * c.sensor.half_cone * 180.0 / std::numbers::pi},
        {"accuracy", c.sensor.accuracy}}},
      {"planner",
       {{"gamma", c.planner.gamma},
        {"ucb_c", c.planner.ucb_c},
        {"max_depth", c.planner.max_depth},
        {"rollout_depth", c.planner.rollout_depth},
        {"sims_per_second", c.planner.sims_per_second},
        {"min_sims", c.planner.min_sims},
        {"branch_particles", c.planner.branch_particles},
        {"mode", planner_mode_name(c.planner.mode)},
        {"plain_stall", c.planner.plain_stall},
        {"query_candidates", c.planner.query_candidates}}},
      {"sketch",
       {{"vertex_target", c.sketch.vertex_target},
        {"steepness", c.sketch.steepness},
        {"near_area_ratio", c.sketch.near_area_ratio},
        {"ring_radius_scale", c.sketch.ring_radius_scale},
        {"ring_samples", c.sketch.ring_samples}}},
      {"human",
       {{"source", source_name(c.source)},
        {"eta", c.human.eta},
        {"xi", c.human.xi},
        {"sketch_period", period(c.human.sketch_period)},
        {"mode", interaction_mode_name(c.human.mode)},
        {"push_period", period(c.human.push_period)},
        {"glimpse_period", period(c.human.glimpse_period)},
        {"glimpse_noise", c.human.glimpse_noise},
        {"sketch_sigma_ratio", c.human.sketch_sigma_ratio},
        {"sketch_lambda", c.human.sketch_lambda},
        {"sketch_psi", c.human.sketch_psi}}},
      {"mode_query", c.mode_query},
      {"robot_start", c.robot_start},
      {"query_timeout", c.query_timeout},
      {"log_ticks", c.log_ticks},
  };
  if (c.assumed) j["assumed"] = {{"eta", c.assumed->eta}, {"xi", c.assumed->xi}};
}

void from_json(const json& j, EpisodeConfig& c) {
  if (!j.is_object()) throw ConfigError("episode config must be an object");
  try {
    read(j, "seed", c.seed);
    read(j, "map", c.map);
    read(j, "t_max", c.t_max);
    read(j, "dt", c.dt);
    read(j, "particles", c.particles);
    if (j.contains("target")) {
      const auto& t = j.at("target");
      read(t, "road_speed", c.target.road_speed);
      read(t, "road_sd", c.target.road_sd);
      read(t, "offroad_speed", c.target.offroad_speed);
      read(t, "offroad_sd", c.target.offroad_sd);
      read(t, "stay_probability", c.target.stay_probability);
      read(t, "heading_sd", c.target.heading_sd);
    }
    if (j.contains("robot")) {
      read(j.at("robot"), "speed", c.robot.speed);
      read(j.at("robot"), "sd", c.robot.sd);
    }
    if (j.contains("sensor")) {
      const auto& s = j.at("sensor");
      read(s, "tau", c.sensor.tau);
      read(s, "accuracy", c.sensor.accuracy);
      if (s.contains("cone_deg")) c.sensor.half_cone = 0.5 * s.at("cone_deg").get<double>() * std::numbers::pi / 180.0;
    }
    if (j.contains("planner")) {
      const auto& p = j.at("planner");
      read(p, "gamma", c.planner.gamma);
      read(p, "ucb_c", c.planner.ucb_c);
      read(p, "max_depth", c.planner.max_depth);
      read(p, "rollout_depth", c.planner.rollout_depth);
      read(p, "sims_per_second", c.planner.sims_per_second);
      read(p, "min_sims", c.planner.min_sims);
      read(p, "branch_particles", c.planner.branch_particles);
      read(p, "plain_stall", c.planner.plain_stall);
      read(p, "query_candidates", c.planner.query_candidates);
      if (p.contains("mode")) {
        const auto m = parse_planner_mode(p.at("mode").get<std::string>());
        if (!m) throw ConfigError("planner mode must be plain, blind or predictive");
        c.planner.mode = *m;
      }
    }
    if (j.contains("sketch")) {
      const auto& s = j.at("sketch");
      read(s, "vertex_target", c.sketch.vertex_target);
      read(s, "steepness", c.sketch.steepness);
      read(s, "near_area_ratio", c.sketch.near_area_ratio);
      read(s, "ring_radius_scale", c.sketch.ring_radius_scale);
      read(s, "ring_samples", c.sketch.ring_samples);
    }
    if (j.contains("human")) {
      const auto& h = j.at("human");
      if (h.is_null()) {
        c.source = HumanSource::None;
      } else {
        if (h.contains("source")) {
          const auto s = h.at("source").get<std::string>();
          if (s == "none") c.source = HumanSource::None;
          else if (s == "simulated") c.source = HumanSource::Simulated;
          else if (s == "live") c.source = HumanSource::Live;
          else throw ConfigError("human source must be none, simulated or live");
        } else {
          c.source = HumanSource::Simulated;
        }
        read(h, "eta", c.human.eta);
        read(h, "xi", c.human.xi);
        c.human.sketch_period = read_period(h, "sketch_period", c.human.sketch_period);
        c.human.push_period = read_period(h, "push_period", c.human.push_period);
        c.human.glimpse_period = read_period(h, "glimpse_period", c.human.glimpse_period);
        read(h, "glimpse_noise", c.human.glimpse_noise);
        read(h, "sketch_sigma_ratio", c.human.sketch_sigma_ratio);
        read(h, "sketch_lambda", c.human.sketch_lambda);
        read(h, "sketch_psi", c.human.sketch_psi);
        if (h.contains("mode")) {
          const auto m = parse_interaction_mode(h.at("mode").get<std::string>());
          if (!m) throw ConfigError("human mode must be active, passive or both");
          c.human.mode = *m;
        }
      }
    }
    if (j.contains("assumed") && !j.at("assumed").is_null()) {
      AnswerModel a = c.human.answer_model();
      read(j.at("assumed"), "eta", a.eta);
      read(j.at("assumed"), "xi", a.xi);
      c.assumed = a;
    }
    read(j, "mode_query", c.mode_query);
    read(j, "robot_start", c.robot_start);
    read(j, "query_timeout", c.query_timeout);
    read(j, "log_ticks", c.log_ticks);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad episode config: ") + e.what());
  }
  auto unit = [](double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw ConfigError(std::string(name) + " must lie in [0, 1]");
  };
  unit(c.human.eta, "eta");
  unit(c.human.xi, "xi");
  if (c.assumed) {
    unit(c.assumed->eta, "assumed eta");
    unit(c.assumed->xi, "assumed xi");
  }
  if (!(c.human.sketch_period > 0)) throw ConfigError("sketch_period must be positive or \"inf\"");
  if (!(c.dt > 0) || !(c.t_max > 0)) throw ConfigError("dt and t_max must be positive");
  if (c.particles == 0) throw ConfigError("particles must be positive");
}

RoadNetwork load_map(const std::string& spec) {
  return spec == "default" ? RoadNetwork::default_map() : RoadNetwork::load(spec);
}

EpisodeConfig preset_config(const std::string& name) {
  EpisodeConfig c;
  if (name == "sim") return c;
  if (name == "study") {
    c.t_max = 900.0;
    c.source = HumanSource::Live;
    c.human.mode = InteractionMode::Both;
    c.mode_query = false;
    return c;
  }
  throw ConfigError("unknown preset '" + name + "' (expected sim or study)");
}

TerrainGrid truth_terrain(const RoadNetwork& net) {
  TerrainGrid grid(net.extent());
  for (const auto& lm : net.landmarks()) {
    if (lm.delta == 1.0) continue;
    for (int iy = 0; iy < grid.ny(); ++iy) {
      for (int ix = 0; ix < grid.nx(); ++ix) {
        if (distance(grid.cell_center(ix, iy), lm.centroid) <= lm.radius) grid.set_cell(ix, iy, lm.delta);
      }
    }
  }
  return grid;
}

namespace {

Belief initial_belief(const RoadNetwork& net, std::size_t n, Rng& rng) { return Belief::road_prior(net, n, 1.0, rng); }

int start_node(const RoadNetwork& net, int configured) {
  if (configured >= 0) {
    if (configured >= static_cast<int>(net.nodes().size())) throw ConfigError("robot_start is not a node");
    return configured;
  }
  return net.nearest_node({0.5 * net.extent(), 0.5 * net.extent()});
}

json query_json(const Codebook& book, const Query& q) { return book.describe(q); }

}  // namespace

Episode::Episode(const RoadNetwork& net, EpisodeConfig config, std::ostream* log_stream)
    : net_(net),
      cfg_(std::move(config)),
      log_(log_stream),
      target_rng_(mix_seed(cfg_.seed, kTargetStream)),
      robot_rng_(mix_seed(cfg_.seed, kRobotStream)),
      sensor_rng_(mix_seed(cfg_.seed, kSensorStream)),
      filter_rng_(mix_seed(cfg_.seed, kFilterStream)),
      planner_rng_(mix_seed(cfg_.seed, kPlannerStream)),
      glimpse_rng_(mix_seed(cfg_.seed, kGlimpseStream)),
      sketch_rng_(mix_seed(cfg_.seed, kSketchStream)),
      answer_rng_(mix_seed(cfg_.seed, kAnswerStream)),
      statement_rng_(mix_seed(cfg_.seed, kStatementStream)),
      truth_grid_(truth_terrain(net)),
      grid_(net.extent()),
      book_(cfg_.mode_query),
      belief_(initial_belief(net, cfg_.particles, filter_rng_)),
      glimpses_(cfg_.source == HumanSource::None ? kNever : cfg_.human.glimpse_period, cfg_.human.glimpse_noise),
      scheduler_(cfg_.human),
      next_push_(cfg_.human.push_period) {
  Rng start(mix_seed(cfg_.seed, kStartStream));
  target_ = target_on_road(net_, net_.sample_road_point(start), uniform01(start) < 0.5);
  robot_ = robot_at(net_, start_node(net_, cfg_.robot_start), 0.0);
  path_.push_back(robot_.position);
  result_.seed = cfg_.seed;
  log({{"type", "header"}, {"version", 1}, {"seed", cfg_.seed}, {"config", cfg_}});
}

void Episode::log(const json& j) {
  if (log_ != nullptr) *log_ << j.dump() << '\n';
}

GenerativeModel Episode::generative_model() const {
  GenerativeModel g;
  g.net = &net_;
  g.grid = &grid_;
  g.book = &book_;
  g.target = cfg_.target;
  g.robot = cfg_.robot;
  g.sensor = cfg_.sensor;
  g.human = cfg_.assumed_model();
  g.human_present = cfg_.source != HumanSource::None && cfg_.human.answers_queries();
  g.dt = cfg_.dt;
  g.t_max = cfg_.t_max;
  return g;
}

void Episode::decide() {
  const GenerativeModel gen = generative_model();
  std::optional<SearchResult> chosen;
  const char* basis = "initial";
  if (!first_decision_) {
    const auto k = static_cast<std::size_t>(action_obs_);
    if (plan_stale_) {
      basis = "replan";
    } else if (cfg_.planner.mode == PlannerMode::Predictive && plan_.branch[k]) {
      chosen = plan_.branch[k];
      basis = "branch";
    } else if (cfg_.planner.mode == PlannerMode::Blind && plan_.blind) {
      chosen = plan_.blind;
      basis = "blind";
    } else {
      basis = cfg_.planner.mode == PlannerMode::Plain ? "plain" : "fallback";
      if (cfg_.planner.mode == PlannerMode::Plain) stall_until_ = clock_ + cfg_.planner.plain_stall;
    }
  }
  if (!chosen) {
    const int budget = std::max(cfg_.planner.min_sims,
                                static_cast<int>(std::lround(cfg_.planner.sims_per_second * kNominalDecisionSeconds)));
    chosen = search(SearchRoot{&belief_.states(), &belief_.weights(), robot_, clock_}, gen, cfg_.planner, budget,
                    planner_rng_);
  }
  first_decision_ = false;
  action_ = chosen->action;
  action_obs_ = RobotObs::None;
  ++result_.decisions;

  json q = nullptr;
  if (!action_.query.is_null()) {
    ++result_.queries_asked;
    result_.reward -= 1.0;
    q = query_json(book_, action_.query);
    if (cfg_.source == HumanSource::Simulated) {
      sim_query_ = action_.query;
    } else if (cfg_.source == HumanSource::Live) {
      if (pending_) {
        log({{"type", "answer"}, {"t", clock_}, {"id", pending_->id}, {"answer", "Null"}, {"reason", "superseded"}});
      }
      pending_ = PendingQuery{next_query_id_++, action_.query, clock_, clock_ + cfg_.query_timeout};
      issued_.push_back(*pending_);
    }
  }

  plan_ = predictive_plan(belief_, gen, cfg_.planner, robot_, action_, clock_, planner_rng_);
  plan_stale_ = false;

  json root = json::array();
  for (const auto& m : chosen->moves) root.push_back({m.move, m.visits, m.value});
  log({{"type", "decision"},
       {"t", clock_},
       {"node", robot_.node},
       {"move", action_.move},
       {"query", q},
       {"query_id", pending_ && !action_.query.is_null() && cfg_.source == HumanSource::Live ? json(pending_->id) : json(nullptr)},
       {"basis", basis},
       {"value", chosen->value},
       {"sims", chosen->simulations},
       {"root", root},
       {"p_obs", plan_.probability},
       {"budget", plan_.budget}});
}

void Episode::fuse_answer(const Query& q, HumanAnswer a) {
  if (a != HumanAnswer::Null) {
    ++result_.queries_answered;
    plan_stale_ = true;
  }
  belief_.update_human(a, q, book_, cfg_.assumed_model(), net_, filter_rng_);
}

void Episode::finish_action() {
  if (sim_query_) {
    const HumanAnswer a = answer_query(target_, *sim_query_, book_, cfg_.human, answer_rng_);
    fuse_answer(*sim_query_, a);
    log({{"type", "answer"}, {"t", clock_}, {"source", "sim"}, {"query", query_json(book_, *sim_query_)},
         {"answer", answer_name(a)}});
    sim_query_.reset();
  }
}

void Episode::expire_query() {
  if (pending_ && clock_ + 1e-9 >= pending_->deadline) {
    log({{"type", "answer"}, {"t", clock_}, {"id", pending_->id}, {"answer", "Null"}, {"reason", "deadline"}});
    pending_.reset();
  }
}

void Episode::register_sketch(SketchRecord sketch, const char* source) {
  json pts = point_list(sketch.points);
  json poly = point_list(sketch.polygon.vertices());
  const std::string label = sketch.label;
  const std::optional<double> delta = sketch.delta;
  const int idx = book_.add(std::move(sketch));
  apply_sketch_terrain(grid_, book_.sketch(idx));
  plan_stale_ = true;
  ++result_.sketches;
  log({{"type", "sketch"},
       {"t", clock_},
       {"source", source},
       {"label", label},
       {"delta", delta ? json(*delta) : json(nullptr)},
       {"points", pts},
       {"polygon", poly},
       {"queries", book_.queries().size()}});
}

const SketchRecord& Episode::submit_sketch(const std::string& label, const std::vector<Point2>& points,
                                           std::optional<double> delta) {
  if (book_.find(label)) throw DuplicateLabel("sketch label already registered: " + label);
  if (delta && !(*delta > 0)) throw DegenerateInput("terrain multiplier must be positive");
  register_sketch(build_sketch(label, points, delta, cfg_.sketch), "client");
  return book_.sketch(*book_.find(label));
}

void Episode::submit_statement(const Statement& st) {
  belief_.fuse_statement(st, book_, cfg_.assumed_model().eta, net_, filter_rng_);
  plan_stale_ = true;
  ++result_.statements;
  log({{"type", "statement"},
       {"t", clock_},
       {"source", "client"},
       {"positive", st.positive},
       {"relation", relation_name(st.relation)},
       {"label", st.label}});
}

bool Episode::submit_answer(int query_id, HumanAnswer answer) {
  if (!pending_ || pending_->id != query_id) {
    log({{"type", "late_answer"}, {"t", clock_}, {"id", query_id}, {"answer", answer_name(answer)}});
    return false;
  }
  const Query q = pending_->query;
  pending_.reset();
  fuse_answer(q, answer);
  log({{"type", "answer"}, {"t", clock_}, {"source", "client"}, {"id", query_id}, {"answer", answer_name(answer)}});
  return true;
}

void Episode::apply_script() {
  while (!script_.empty() && script_.front().clock <= clock_ + 1e-9) {
    const json ev = script_.front().event;
    script_.pop_front();
    const std::string type = ev.at("type");
    if (type == "sketch") {
      std::optional<double> delta;
      if (!ev.at("delta").is_null()) delta = ev.at("delta").get<double>();
      submit_sketch(ev.at("label"), read_points_json(ev.at("points")), delta);
    } else if (type == "statement") {
      const auto rel = parse_relation(ev.at("relation").get<std::string>());
      if (!rel) throw ProtocolError("bad relation in script");
      submit_statement({ev.at("positive").get<bool>(), *rel, ev.at("label")});
    } else if (type == "answer") {
      submit_answer(ev.at("id").get<int>(), *parse_answer(ev.at("answer").get<std::string>()));
    } else if (type == "late_answer") {
      submit_answer(ev.at("id").get<int>(), *parse_answer(ev.at("answer").get<std::string>()));
    }
  }
}

void Episode::tick() {
  if (done_) return;
  apply_script();
  if (robot_.idle() && clock_ >= stall_until_) decide();

  target_ = step_target(net_, cfg_.target, truth_grid_, target_, cfg_.dt, target_rng_);
  if (clock_ >= stall_until_) robot_ = step_robot(net_, cfg_.robot, robot_, action_.move, cfg_.dt, robot_rng_);
  clock_ += cfg_.dt;
  path_.push_back(robot_.position);
  const RobotObs o = sense(cfg_.sensor, robot_, target_, sensor_rng_);
  belief_.predict(net_, cfg_.target, grid_, cfg_.dt, filter_rng_);
  belief_.update_robot(o, robot_, cfg_.sensor, net_, filter_rng_);
  action_obs_ = std::max(action_obs_, o);
  if (cfg_.log_ticks) {
    log({{"type", "tick"},
         {"t", clock_},
         {"robot", {robot_.position.x, robot_.position.y, robot_.heading}},
         {"target", {target_.position.x, target_.position.y, target_.mode == Mode::OffRoad ? "off" : "on"}},
         {"obs", robot_obs_name(o)}});
  }
  if (o == RobotObs::Captured && distance(robot_.position, target_.position) <= cfg_.sensor.tau) {
    done_ = true;
    result_.captured = true;
    result_.time_to_capture = clock_;
    result_.reward += 100.0;
    log({{"type", "end"}, {"t", clock_}, {"captured", true}, {"reward", result_.reward}});
    return;
  }

  if (cfg_.source != HumanSource::None) {
    if (auto g = glimpses_.poll(clock_, target_.position, glimpse_rng_)) {
      last_glimpse_ = g;
      new_glimpses_.push_back(*g);
      log({{"type", "glimpse"}, {"t", clock_}, {"at", {g->x, g->y}}});
    }
  }
  if (cfg_.source == HumanSource::Simulated) {
    if (auto sk = scheduler_.maybe_sketch(clock_, net_.landmarks(), last_glimpse_, cfg_.sketch, sketch_rng_)) {
      register_sketch(std::move(*sk), "sim");
    }
    if (cfg_.human.volunteers() && clock_ + 1e-9 >= next_push_) {
      next_push_ += cfg_.human.push_period;
      if (auto st = volunteer_statement(target_.position, book_, cfg_.human, statement_rng_)) {
        belief_.fuse_statement(*st, book_, cfg_.assumed_model().eta, net_, filter_rng_);
        plan_stale_ = true;
        ++result_.statements;
        log({{"type", "statement"},
             {"t", clock_},
             {"source", "sim"},
             {"positive", st->positive},
             {"relation", relation_name(st->relation)},
             {"label", st->label}});
      }
    }
  }
  expire_query();
  if (robot_.idle() && clock_ >= stall_until_) finish_action();
  if (clock_ + 1e-9 >= cfg_.t_max) {
    done_ = true;
    log({{"type", "end"}, {"t", clock_}, {"captured", false}, {"reward", result_.reward}});
  }
}

EpisodeResult Episode::run() {
  while (!done_) tick();
  return result();
}

std::vector<Point2> Episode::take_glimpses() { return std::exchange(new_glimpses_, {}); }

std::vector<PendingQuery> Episode::take_issued_queries() { return std::exchange(issued_, {}); }

EpisodeResult Episode::result() const {
  EpisodeResult r = result_;
  r.duration = clock_;
  return r;
}

EpisodeResult run_episode(const RoadNetwork& net, const EpisodeConfig& config, std::ostream* log) {
  Episode ep(net, config, log);
  return ep.run();
}

std::string replay_log(const std::string& log_text) {
  std::istringstream in(log_text);
  std::string line;
  std::optional<EpisodeConfig> config;
  std::vector<ScriptedInput> script;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    json ev;
    try {
      ev = json::parse(line);
    } catch (const json::exception& e) {
      throw ProtocolError(std::string("malformed log line: ") + e.what());
    }
    const std::string type = ev.value("type", "");
    if (type == "header") {
      config = ev.at("config").get<EpisodeConfig>();
    } else if ((type == "sketch" || type == "statement" || type == "answer") && ev.value("source", "") == "client") {
      script.push_back({ev.at("t").get<double>(), ev});
    } else if (type == "late_answer") {
      script.push_back({ev.at("t").get<double>(), ev});
    }
  }
  if (!config) throw ProtocolError("log has no header");
  const RoadNetwork net = load_map(config->map);
  std::ostringstream out;
  Episode ep(net, *config, &out);
  ep.set_script(std::move(script));
  ep.run();
  return out.str();
}

}  // namespace sketchsearch

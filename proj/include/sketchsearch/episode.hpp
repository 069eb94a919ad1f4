#pragma once

#include <cstdint>
#include <deque>
#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sketchsearch/belief.hpp"
#include "sketchsearch/codebook.hpp"
#include "sketchsearch/planner.hpp"
#include "sketchsearch/sim_human.hpp"
#include "sketchsearch/world.hpp"

namespace sketchsearch {

/// Where human input comes from.
enum class HumanSource { None, Simulated, Live };

struct EpisodeConfig {
  std::uint64_t seed = 1;
  std::string map = "default";  // "default" or a map file path
  double t_max = 600.0;
  double dt = 1.0;
  std::size_t particles = 10000;
  TargetDynamics target;
  RobotDynamics robot;
  SensorModel sensor;
  PlannerConfig planner;
  SketchConfig sketch;
  HumanSource source = HumanSource::None;
  HumanModel human;                    // simulated human (also live-session mode)
  std::optional<AnswerModel> assumed;  // planner/filter model; defaults to the human's own
  bool mode_query = false;
  int robot_start = -1;  // -1: node nearest the map centre
  double query_timeout = 15.0;  // live queries resolve to Null after this
  bool log_ticks = false;

  AnswerModel assumed_model() const { return assumed.value_or(human.answer_model()); }
};

void to_json(nlohmann::json& j, const EpisodeConfig& c);
void from_json(const nlohmann::json& j, EpisodeConfig& c);
RoadNetwork load_map(const std::string& spec);

/// Named presets: "sim" (600 s batch episodes) and "study" (900 s live
/// sessions, no mode query, both interaction modes).
EpisodeConfig preset_config(const std::string& name);

struct EpisodeResult {
  std::uint64_t seed = 0;
  bool captured = false;
  std::optional<double> time_to_capture;
  int queries_asked = 0;
  int queries_answered = 0;
  int sketches = 0;
  int statements = 0;
  int decisions = 0;
  double reward = 0.0;
  double duration = 0.0;
};

struct PendingQuery {
  int id = 0;
  Query query;
  double asked = 0.0;
  double deadline = 0.0;
};

/// Client-originated input replayed at a given engine clock.
struct ScriptedInput {
  double clock = 0.0;
  nlohmann::json event;
};

/// True terrain: every 10 m cell within a landmark's radius takes its delta.
TerrainGrid truth_terrain(const RoadNetwork& net);

/// One search episode: ground truth, filter, planner and human channel.
/// Single-threaded; the service serializes all calls onto one strand.
class Episode {
 public:
  Episode(const RoadNetwork& net, EpisodeConfig config, std::ostream* log = nullptr);

  bool done() const { return done_; }
  double clock() const { return clock_; }
  void tick();
  EpisodeResult run();

  // Live inputs. Each is logged with the current clock so sessions replay.
  const SketchRecord& submit_sketch(const std::string& label, const std::vector<Point2>& points,
                                    std::optional<double> delta);
  void submit_statement(const Statement& st);
  /// False when no query with this id is pending (late or unknown answers).
  bool submit_answer(int query_id, HumanAnswer answer);
  void set_script(std::vector<ScriptedInput> script) { script_.assign(script.begin(), script.end()); }

  const EpisodeConfig& config() const { return cfg_; }
  const RoadNetwork& network() const { return net_; }
  const Belief& belief() const { return belief_; }
  const RobotState& robot() const { return robot_; }
  const TargetState& target() const { return target_; }
  const Codebook& codebook() const { return book_; }
  const TerrainGrid& terrain() const { return grid_; }
  const ActionPair& action() const { return action_; }
  const std::vector<Point2>& path() const { return path_; }
  const std::optional<PendingQuery>& pending_query() const { return pending_; }
  /// Glimpses since the last call.
  std::vector<Point2> take_glimpses();
  /// Queries issued since the last call (live sessions forward them to the client).
  std::vector<PendingQuery> take_issued_queries();
  EpisodeResult result() const;

 private:
  GenerativeModel generative_model() const;
  void decide();
  void finish_action();
  void expire_query();
  void apply_script();
  void register_sketch(SketchRecord sketch, const char* source);
  void fuse_answer(const Query& q, HumanAnswer a);
  void log(const nlohmann::json& j);

  const RoadNetwork& net_;
  EpisodeConfig cfg_;
  std::ostream* log_;

  Rng target_rng_, robot_rng_, sensor_rng_, filter_rng_, planner_rng_, glimpse_rng_, sketch_rng_, answer_rng_,
      statement_rng_;

  TerrainGrid truth_grid_;
  TerrainGrid grid_;
  Codebook book_;
  TargetState target_;
  RobotState robot_;
  Belief belief_;
  GlimpseSource glimpses_;
  SketchScheduler scheduler_;
  double next_push_;

  double clock_ = 0.0;
  bool done_ = false;
  bool first_decision_ = true;
  double stall_until_ = 0.0;
  ActionPair action_;
  RobotObs action_obs_ = RobotObs::None;
  PredictivePlan plan_;
  bool plan_stale_ = false;  // human input arrived after the plan was made
  std::optional<Query> sim_query_;  // simulated human answers at action end
  std::optional<PendingQuery> pending_;
  int next_query_id_ = 1;
  std::optional<Point2> last_glimpse_;
  std::vector<Point2> new_glimpses_;
  std::vector<PendingQuery> issued_;
  std::vector<Point2> path_;
  std::deque<ScriptedInput> script_;
  EpisodeResult result_;
};

EpisodeResult run_episode(const RoadNetwork& net, const EpisodeConfig& config, std::ostream* log = nullptr);

/// Reruns the episode described by a log and returns the regenerated log text.
std::string replay_log(const std::string& log_text);

}  // namespace sketchsearch

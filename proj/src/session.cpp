#include "sketchsearch/session.hpp"

#include <algorithm>

#include "sketchsearch/error.hpp"

namespace sketchsearch {

using nlohmann::json;

namespace {

json points_json(const std::vector<Point2>& pts) {
  json a = json::array();
  for (const auto& p : pts) a.push_back({p.x, p.y});
  return a;
}

std::vector<Point2> read_points(const json& a) {
  if (!a.is_array()) throw ProtocolError("points must be an array of [x, y] pairs");
  std::vector<Point2> pts;
  pts.reserve(a.size());
  for (const auto& p : a) {
    if (!p.is_array() || p.size() != 2 || !p[0].is_number() || !p[1].is_number()) {
      throw ProtocolError("points must be an array of [x, y] pairs");
    }
    pts.push_back({p[0].get<double>(), p[1].get<double>()});
  }
  return pts;
}

const json& field(const json& frame, const char* key) {
  if (!frame.contains(key)) throw ProtocolError(std::string("missing field '") + key + "'");
  return frame.at(key);
}

std::string string_field(const json& frame, const char* key) {
  const json& v = field(frame, key);
  if (!v.is_string()) throw ProtocolError(std::string("field '") + key + "' must be a string");
  return v.get<std::string>();
}

json frame(const char* type) { return {{"v", kProtocolVersion}, {"type", type}}; }

// Error code for each engine failure a client can trigger.
std::string error_code(const Error& e) {
  if (dynamic_cast<const ProtocolError*>(&e)) return "malformed";
  if (dynamic_cast<const DuplicateLabel*>(&e)) return "duplicate_label";
  if (dynamic_cast<const UnknownReference*>(&e) || dynamic_cast<const UnknownSketch*>(&e)) return "unknown_label";
  if (dynamic_cast<const DegenerateInput*>(&e) || dynamic_cast<const DegeneratePolygon*>(&e)) return "degenerate";
  return "rejected";
}

}  // namespace

SessionRequest parse_start(const json& f) {
  SessionRequest r;
  if (f.contains("mode")) {
    const auto m = f.at("mode").is_string() ? parse_interaction_mode(f.at("mode").get<std::string>()) : std::nullopt;
    if (!m) throw ProtocolError("mode must be active, passive or both");
    r.mode = *m;
  }
  if (f.contains("preset")) r.preset = string_field(f, "preset");
  if (f.contains("seed")) {
    if (!f.at("seed").is_number_unsigned()) throw ProtocolError("seed must be a non-negative integer");
    r.seed = f.at("seed").get<std::uint64_t>();
  }
  if (f.contains("speed")) {
    if (!f.at("speed").is_number() || f.at("speed").get<double>() < 0) throw ProtocolError("speed must be >= 0");
    r.speed = f.at("speed").get<double>();
  }
  if (f.contains("config")) {
    if (!f.at("config").is_object()) throw ProtocolError("config must be an object");
    r.config = f.at("config");
  }
  return r;
}

EpisodeConfig session_config(const SessionRequest& req, const json& service_patch) {
  json j = preset_config(req.preset);
  j.merge_patch(service_patch);
  j.merge_patch(req.config);
  EpisodeConfig c = j.get<EpisodeConfig>();
  c.source = HumanSource::Live;
  c.human.mode = req.mode;
  if (req.seed) c.seed = *req.seed;
  return c;
}

json error_frame(const std::string& code, const std::string& message) {
  json f = frame("error");
  f["code"] = code;
  f["message"] = message;
  return f;
}

json heartbeat_frame(double engine_clock) {
  json f = frame("heartbeat");
  f["clock"] = engine_clock;
  return f;
}

OutboundQueue::OutboundQueue(std::size_t limit) : limit_(limit) {
  if (limit_ == 0) throw ConfigError("queue limit must be positive");
}

bool OutboundQueue::push(std::string frame, bool droppable) {
  if (frames_.size() >= limit_) {
    const auto first = frames_.begin() + (in_flight_ ? 1 : 0);
    const auto victim = std::find_if(first, frames_.end(), [](const auto& f) { return f.second; });
    if (victim != frames_.end()) {
      frames_.erase(victim);
      ++dropped_;
    } else if (droppable) {
      ++dropped_;
      return false;
    }
  }
  frames_.emplace_back(std::move(frame), droppable);
  return true;
}

const std::string& OutboundQueue::begin_write() {
  in_flight_ = true;
  return frames_.front().first;
}

void OutboundQueue::pop() {
  if (!frames_.empty()) frames_.pop_front();
  in_flight_ = false;
}

void OutboundQueue::clear() {
  // The in-flight frame backs a pending write; it leaves through pop().
  frames_.erase(frames_.begin() + (in_flight_ && !frames_.empty() ? 1 : 0), frames_.end());
}

Session::Session(std::string id, const RoadNetwork& net, EpisodeConfig config, std::ostream* log)
    : id_(std::move(id)), episode_(net, std::move(config), log) {}

json Session::opened() const {
  const auto& cfg = episode_.config();
  json f = frame("session");
  f["session"] = id_;
  f["mode"] = interaction_mode_name(cfg.human.mode);
  f["seed"] = cfg.seed;
  f["t_max"] = cfg.t_max;
  f["dt"] = cfg.dt;
  f["query_timeout"] = cfg.query_timeout;
  return f;
}

json Session::query_frame(const PendingQuery& q) const {
  const auto& book = episode_.codebook();
  json f = frame("query");
  f["id"] = q.id;
  if (q.query.kind == Query::Kind::Relation) {
    f["relation"] = relation_name(q.query.relation);
    f["label"] = book.sketch(q.query.sketch).label;
  } else {
    f["relation"] = "offroad";
    f["label"] = nullptr;
  }
  f["text"] = book.describe(q.query);
  f["asked"] = q.asked;
  f["deadline"] = q.deadline;
  return f;
}

json Session::telemetry() const {
  const auto& net = episode_.network();
  const auto& robot = episode_.robot();
  const auto result = episode_.result();
  json f = frame("telemetry");
  f["session"] = id_;
  f["tick"] = tick_;
  f["clock"] = episode_.clock();
  f["robot"] = {{"x", robot.position.x}, {"y", robot.position.y}, {"heading", robot.heading}, {"node", robot.node}};
  f["path"] = points_json(episode_.path());
  json belief = json::array();
  for (const auto& p : episode_.belief().snapshot(500)) {
    belief.push_back({p.position.x, p.position.y, p.weight, p.mode == Mode::OnRoad ? "on" : "off"});
  }
  f["belief"] = std::move(belief);
  json edges = json::array();
  for (const auto& e : net.edges()) edges.push_back({e.a, e.b});
  f["graph"] = {{"nodes", points_json(net.nodes())}, {"edges", std::move(edges)}};
  f["glimpses"] = points_json(glimpses_);
  f["score"] = {{"captured", result.captured},
                {"reward", result.reward},
                {"queries_asked", result.queries_asked},
                {"queries_answered", result.queries_answered},
                {"sketches", result.sketches},
                {"statements", result.statements}};
  json sketches = json::array();
  for (const auto& s : episode_.codebook().sketches()) {
    sketches.push_back({{"label", s->label}, {"polygon", points_json(s->polygon.vertices())}});
  }
  f["sketches"] = std::move(sketches);
  f["query_space"] = episode_.codebook().queries().size();
  const auto& pending = episode_.pending_query();
  f["pending_query"] = pending ? json(pending->id) : json(nullptr);
  f["done"] = episode_.done();
  return f;
}

std::vector<json> Session::handle(const std::string& text) {
  json f;
  try {
    f = json::parse(text);
  } catch (const json::parse_error&) {
    return {error_frame("malformed", "frame is not valid JSON")};
  }
  try {
    return {handle_frame(f)};
  } catch (const Error& e) {
    return {error_frame(error_code(e), e.what())};
  } catch (const json::exception& e) {
    return {error_frame("malformed", e.what())};
  }
}

json Session::handle_frame(const json& f) {
  if (!f.is_object()) throw ProtocolError("frame must be an object");
  if (f.contains("v") && f.at("v") != kProtocolVersion) {
    throw ProtocolError("unsupported protocol version " + f.at("v").dump());
  }
  const std::string type = string_field(f, "type");
  if (episode_.done() && type != "snapshot") return error_frame("ended", "episode has ended");

  if (type == "sketch") {
    const std::string label = string_field(f, "label");
    if (label.empty()) throw ProtocolError("label must be non-empty");
    std::optional<double> delta;
    if (f.contains("delta") && !f.at("delta").is_null()) {
      if (!f.at("delta").is_number()) throw ProtocolError("delta must be a number or null");
      delta = f.at("delta").get<double>();
    }
    const auto& s = episode_.submit_sketch(label, read_points(field(f, "points")), delta);
    json ack = frame("sketch_ack");
    ack["label"] = s.label;
    ack["polygon"] = points_json(s.polygon.vertices());
    ack["hull_vertices"] = s.hull.size();
    ack["query_space"] = episode_.codebook().queries().size();
    return ack;
  }
  if (type == "statement") {
    if (mode() == InteractionMode::Active) return error_frame("mode", "statements are disabled in active mode");
    Statement st;
    const json& pol = field(f, "positive");
    if (!pol.is_boolean()) throw ProtocolError("positive must be a boolean");
    st.positive = pol.get<bool>();
    const auto rel = parse_relation(string_field(f, "relation"));
    if (!rel) throw ProtocolError("unknown relation '" + f.at("relation").get<std::string>() + "'");
    st.relation = *rel;
    st.label = string_field(f, "label");
    episode_.submit_statement(st);
    json ack = frame("statement_ack");
    ack["clock"] = episode_.clock();
    return ack;
  }
  if (type == "answer") {
    if (mode() == InteractionMode::Passive) return error_frame("mode", "no queries are asked in passive mode");
    const json& id = field(f, "id");
    if (!id.is_number_integer()) throw ProtocolError("id must be an integer");
    const auto answer = parse_answer(string_field(f, "answer"));
    if (!answer) throw ProtocolError("answer must be Yes, No or IDontKnow");
    if (!episode_.submit_answer(id.get<int>(), *answer)) {
      json n = frame("notice");
      n["code"] = "late_answer";
      n["id"] = id;
      n["message"] = "query is no longer pending; Null was already fused";
      return n;
    }
    json ack = frame("answer_ack");
    ack["id"] = id;
    return ack;
  }
  if (type == "snapshot") return telemetry();
  throw ProtocolError("unknown frame type '" + type + "'");
}

std::vector<json> Session::step() {
  std::vector<json> out;
  if (episode_.done()) return out;
  episode_.tick();
  ++tick_;
  for (const auto& g : episode_.take_glimpses()) glimpses_.push_back(g);
  std::vector<json> queries;
  for (const auto& q : episode_.take_issued_queries()) {
    if (episode_.done()) break;
    if (!connected_) {
      episode_.submit_answer(q.id, HumanAnswer::Null);
    } else if (mode() != InteractionMode::Passive) {
      queries.push_back(query_frame(q));
    }
  }
  out.push_back(telemetry());
  glimpses_.clear();
  for (auto& q : queries) out.push_back(std::move(q));
  if (episode_.done()) {
    const auto r = episode_.result();
    json end = frame("end");
    end["captured"] = r.captured;
    end["time_to_capture"] = r.time_to_capture ? json(*r.time_to_capture) : json(nullptr);
    end["clock"] = r.duration;
    end["reward"] = r.reward;
    out.push_back(std::move(end));
  }
  return out;
}

void Session::set_connected(bool connected) {
  connected_ = connected;
  if (!connected_ && episode_.pending_query()) episode_.submit_answer(episode_.pending_query()->id, HumanAnswer::Null);
}

}  // namespace sketchsearch

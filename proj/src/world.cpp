#include "sketchsearch/world.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <numbers>
#include <ostream>
#include <queue>
#include <set>
#include <sstream>

#include "sketchsearch/autolabel.hpp"
#include "sketchsearch/error.hpp"

namespace sketchsearch {

namespace {

constexpr double kPi = std::numbers::pi;

double wrap_angle(double a) {
  a = std::fmod(a + kPi, 2.0 * kPi);
  if (a < 0) a += 2.0 * kPi;
  return a - kPi;
}

bool connected(std::size_t n, const std::vector<std::pair<int, int>>& edges) {
  std::vector<std::vector<int>> adj(n);
  for (auto [a, b] : edges) {
    adj[static_cast<std::size_t>(a)].push_back(b);
    adj[static_cast<std::size_t>(b)].push_back(a);
  }
  std::vector<char> seen(n, 0);
  std::queue<int> q;
  q.push(0);
  seen[0] = 1;
  std::size_t count = 1;
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (int v : adj[static_cast<std::size_t>(u)]) {
      if (!seen[static_cast<std::size_t>(v)]) {
        seen[static_cast<std::size_t>(v)] = 1;
        ++count;
        q.push(v);
      }
    }
  }
  return count == n;
}

}  // namespace

RoadNetwork::RoadNetwork(std::vector<Point2> nodes, std::vector<std::pair<int, int>> edges,
                         std::vector<Landmark> landmarks, double extent)
    : nodes_(std::move(nodes)), landmarks_(std::move(landmarks)), extent_(extent) {
  if (nodes_.size() < 2) throw ConfigError("road network needs at least two nodes");
  if (!(extent_ > 0)) throw ConfigError("map extent must be positive");
  for (const auto& p : nodes_) {
    if (!in_bounds(p)) throw ConfigError("road node outside map bounds");
  }
  const int n = static_cast<int>(nodes_.size());
  adjacency_.assign(nodes_.size(), {});
  for (auto [a, b] : edges) {
    if (a < 0 || b < 0 || a >= n || b >= n || a == b) throw ConfigError("bad road edge");
    if (edge_between(a, b) >= 0) throw ConfigError("duplicate road edge");
    const double len = distance(node(a), node(b));
    if (!(len > 0)) throw ConfigError("zero-length road edge");
    edges_.push_back({a, b, len});
    adjacency_[static_cast<std::size_t>(a)].push_back(b);
    adjacency_[static_cast<std::size_t>(b)].push_back(a);
  }
  if (!connected(nodes_.size(), edges)) throw ConfigError("road network is not connected");
  for (auto& adj : adjacency_) std::sort(adj.begin(), adj.end());
  for (const auto& e : edges_) {
    total_length_ += e.length;
    cumulative_length_.push_back(total_length_);
  }
  std::set<std::string> names;
  for (const auto& lm : landmarks_) {
    if (!names.insert(lm.name).second) throw ConfigError("duplicate landmark name: " + lm.name);
  }
  build_moves();
}

int RoadNetwork::edge_between(int a, int b) const {
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    const auto& e = edges_[i];
    if ((e.a == a && e.b == b) || (e.a == b && e.b == a)) return static_cast<int>(i);
  }
  return -1;
}

void RoadNetwork::build_moves() {
  const std::size_t n = nodes_.size();
  moves_.assign(n, {});
  routes_.assign(n, {});
  for (std::size_t u = 0; u < n; ++u) {
    // destination -> (length, path)
    std::map<int, std::pair<double, std::vector<int>>> best;
    const int ui = static_cast<int>(u);
    for (int v : adjacency_[u]) {
      const double l1 = distance(nodes_[u], node(v));
      auto it = best.find(v);
      if (it == best.end() || l1 < it->second.first) best[v] = {l1, {v}};
      for (int w : neighbors(v)) {
        if (w == ui) continue;
        const double l2 = l1 + distance(node(v), node(w));
        auto jt = best.find(w);
        if (jt == best.end() || l2 < jt->second.first) best[w] = {l2, {v, w}};
      }
    }
    for (auto& [dest, entry] : best) {
      moves_[u].push_back(dest);
      routes_[u].push_back(std::move(entry.second));
    }
  }
}

const std::vector<int>& RoadNetwork::route(int from, int to) const {
  static const std::vector<int> kEmpty;
  const auto& mv = moves_[static_cast<std::size_t>(from)];
  const auto it = std::lower_bound(mv.begin(), mv.end(), to);
  if (it == mv.end() || *it != to) return kEmpty;
  return routes_[static_cast<std::size_t>(from)][static_cast<std::size_t>(it - mv.begin())];
}

double RoadNetwork::route_length(int from, int to) const {
  double len = 0.0;
  int prev = from;
  for (int v : route(from, to)) {
    len += distance(node(prev), node(v));
    prev = v;
  }
  return len;
}

Point2 RoadNetwork::position(RoadPoint rp) const {
  const auto& e = edge(rp.edge);
  return node(e.a) + rp.t * (node(e.b) - node(e.a));
}

RoadPoint RoadNetwork::project(Point2 p) const {
  RoadPoint best{0, 0.0};
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < edges_.size(); ++i) {
    const Point2 a = nodes_[static_cast<std::size_t>(edges_[i].a)];
    const Point2 ab = nodes_[static_cast<std::size_t>(edges_[i].b)] - a;
    const double t = std::clamp(dot(p - a, ab) / dot(ab, ab), 0.0, 1.0);
    const double d = distance(p, a + t * ab);
    if (d < best_d) {
      best_d = d;
      best = {static_cast<int>(i), t};
    }
  }
  return best;
}

RoadPoint RoadNetwork::sample_road_point(Rng& rng) const {
  const double u = uniform01(rng) * total_length_;
  auto it = std::upper_bound(cumulative_length_.begin(), cumulative_length_.end(), u);
  if (it == cumulative_length_.end()) --it;
  const auto i = static_cast<std::size_t>(it - cumulative_length_.begin());
  const double start = cumulative_length_[i] - edges_[i].length;
  return {static_cast<int>(i), std::clamp((u - start) / edges_[i].length, 0.0, 1.0)};
}

int RoadNetwork::nearest_node(Point2 p) const {
  int best = 0;
  for (std::size_t i = 1; i < nodes_.size(); ++i) {
    if (distance(p, nodes_[i]) < distance(p, node(best))) best = static_cast<int>(i);
  }
  return best;
}

bool RoadNetwork::in_bounds(Point2 p) const {
  return p.x >= 0 && p.y >= 0 && p.x <= extent_ && p.y <= extent_;
}

RoadNetwork RoadNetwork::default_map() {
  constexpr int kSide = 6;
  constexpr double kSpacing = 180.0;
  constexpr double kOrigin = 50.0;
  Rng rng(20240611);
  std::vector<Point2> nodes;
  for (int j = 0; j < kSide; ++j) {
    for (int i = 0; i < kSide; ++i) {
      const double jx = (i == 0 || i == kSide - 1) ? 0.0 : 50.0 * (uniform01(rng) - 0.5);
      const double jy = (j == 0 || j == kSide - 1) ? 0.0 : 50.0 * (uniform01(rng) - 0.5);
      nodes.push_back({kOrigin + kSpacing * i + jx, kOrigin + kSpacing * j + jy});
    }
  }
  std::vector<std::pair<int, int>> edges;
  for (int j = 0; j < kSide; ++j) {
    for (int i = 0; i < kSide; ++i) {
      const int id = j * kSide + i;
      if (i + 1 < kSide) edges.emplace_back(id, id + 1);
      if (j + 1 < kSide) edges.emplace_back(id, id + kSide);
    }
  }
  // Knock out a few interior streets so the grid is not perfectly regular.
  for (int removed = 0; removed < 6;) {
    const auto k = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(edges.size()));
    auto trial = edges;
    trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(k));
    std::vector<int> degree(nodes.size(), 0);
    for (auto [a, b] : trial) {
      ++degree[static_cast<std::size_t>(a)];
      ++degree[static_cast<std::size_t>(b)];
    }
    if (std::all_of(degree.begin(), degree.end(), [](int d) { return d >= 2; }) &&
        connected(nodes.size(), trial)) {
      edges = std::move(trial);
      ++removed;
    }
  }
  auto cell = [&](double ci, double cj) { return Point2{kOrigin + kSpacing * ci, kOrigin + kSpacing * cj}; };
  std::vector<Landmark> landmarks{
      {"Pond", cell(0.5, 0.5), 55.0, 0.5},    {"Farm", cell(2.5, 0.6), 65.0, 1.0},
      {"Quarry", cell(4.4, 1.5), 55.0, 0.5},  {"Church", cell(1.5, 2.5), 45.0, 1.0},
      {"Forest", cell(3.5, 2.6), 70.0, 0.5},  {"Orchard", cell(0.6, 4.4), 60.0, 1.5},
      {"Mill", cell(2.5, 4.0), 50.0, 1.0},    {"Bridge", cell(4.5, 4.5), 45.0, 1.5},
  };
  return RoadNetwork(std::move(nodes), std::move(edges), std::move(landmarks), 1000.0);
}

RoadNetwork RoadNetwork::parse(std::istream& in) {
  std::string section;
  std::map<int, Point2> node_map;
  std::vector<std::pair<int, int>> edges;
  std::vector<Landmark> landmarks;
  double extent = 1000.0;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string first;
    if (!(ls >> first)) continue;
    if (first.front() == '[') {
      section = first;
      continue;
    }
    std::istringstream row(line);
    bool ok = false;
    if (section == "[map]") {
      std::string key;
      ok = static_cast<bool>(row >> key >> extent) && key == "extent";
    } else if (section == "[nodes]") {
      int id;
      Point2 p;
      ok = static_cast<bool>(row >> id >> p.x >> p.y);
      if (ok) node_map[id] = p;
    } else if (section == "[edges]") {
      int a, b;
      ok = static_cast<bool>(row >> a >> b);
      if (ok) edges.emplace_back(a, b);
    } else if (section == "[landmarks]") {
      Landmark lm;
      ok = static_cast<bool>(row >> lm.name >> lm.centroid.x >> lm.centroid.y >> lm.radius >> lm.delta);
      if (ok) landmarks.push_back(lm);
    }
    if (!ok) throw ConfigError("map line " + std::to_string(lineno) + ": cannot parse '" + line + "'");
  }
  std::vector<Point2> nodes;
  int expected = 0;
  for (const auto& [id, p] : node_map) {
    if (id != expected++) throw ConfigError("map node ids must be 0..n-1");
    nodes.push_back(p);
  }
  return RoadNetwork(std::move(nodes), std::move(edges), std::move(landmarks), extent);
}

RoadNetwork RoadNetwork::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open map file: " + path);
  return parse(in);
}

void RoadNetwork::save(std::ostream& out) const {
  out.precision(17);
  out << "[map]\nextent " << extent_ << "\n[nodes]\n";
  for (std::size_t i = 0; i < nodes_.size(); ++i) out << i << ' ' << nodes_[i].x << ' ' << nodes_[i].y << '\n';
  out << "[edges]\n";
  for (const auto& e : edges_) out << e.a << ' ' << e.b << '\n';
  out << "[landmarks]\n";
  for (const auto& lm : landmarks_) {
    out << lm.name << ' ' << lm.centroid.x << ' ' << lm.centroid.y << ' ' << lm.radius << ' ' << lm.delta << '\n';
  }
}

// ---------------------------------------------------------------------------

TerrainGrid::TerrainGrid(double extent, double cell)
    : extent_(extent), cell_(cell), n_(static_cast<int>(std::ceil(extent / cell))) {
  if (!(cell > 0) || !(extent > 0)) throw ConfigError("terrain grid needs positive extent and cell size");
  alpha_.assign(static_cast<std::size_t>(n_) * static_cast<std::size_t>(n_), 1.0);
}

double TerrainGrid::at(Point2 p) const {
  const int ix = std::clamp(static_cast<int>(std::floor(p.x / cell_)), 0, n_ - 1);
  const int iy = std::clamp(static_cast<int>(std::floor(p.y / cell_)), 0, n_ - 1);
  return alpha_[index(ix, iy)];
}

void TerrainGrid::set_cell(int ix, int iy, double value) {
  if (!(value > 0)) throw ConfigError("terrain multiplier must be positive");
  alpha_[index(ix, iy)] = value;
}

Point2 TerrainGrid::cell_center(int ix, int iy) const {
  return {(ix + 0.5) * cell_, (iy + 0.5) * cell_};
}

void apply_polygon_terrain(TerrainGrid& grid, const ConvexPolygon& poly, double delta) {
  for (int iy = 0; iy < grid.ny(); ++iy) {
    for (int ix = 0; ix < grid.nx(); ++ix) {
      if (contains(poly, grid.cell_center(ix, iy))) grid.set_cell(ix, iy, delta);
    }
  }
}

void apply_sketch_terrain(TerrainGrid& grid, const SketchRecord& sketch) {
  if (sketch.delta) apply_polygon_terrain(grid, sketch.polygon, *sketch.delta);
}

// ---------------------------------------------------------------------------

TargetState target_on_road(const RoadNetwork& net, RoadPoint rp, bool forward) {
  const auto& e = net.edge(rp.edge);
  TargetState t;
  t.position = net.position(rp);
  t.mode = Mode::OnRoad;
  t.from = forward ? e.a : e.b;
  t.to = forward ? e.b : e.a;
  const Point2 d = net.node(t.to) - net.node(t.from);
  t.heading = std::atan2(d.y, d.x);
  return t;
}

namespace {

void advance_on_road(const RoadNetwork& net, TargetState& t, double dist, Rng& rng) {
  while (dist > 0) {
    const Point2 goal = net.node(t.to);
    const double left = distance(t.position, goal);
    if (dist < left) {
      t.position = t.position + (dist / left) * (goal - t.position);
      return;
    }
    dist -= left;
    t.position = goal;
    const auto& nb = net.neighbors(t.to);
    int next = t.from;
    if (nb.size() > 1) {
      // Uniform over continuing edges; U-turns only at dead ends.
      auto k = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(nb.size() - 1));
      k = std::min(k, nb.size() - 2);
      for (int v : nb) {
        if (v == t.from) continue;
        if (k-- == 0) {
          next = v;
          break;
        }
      }
    }
    t.from = t.to;
    t.to = next;
    const Point2 d = net.node(t.to) - net.node(t.from);
    t.heading = std::atan2(d.y, d.x);
  }
}

}  // namespace

TargetState step_target(const RoadNetwork& net, const TargetDynamics& dyn, const TerrainGrid& grid,
                        const TargetState& t, double dt, Rng& rng) {
  if (!(dt > 0)) return t;
  TargetState out = t;
  const double stay = dt == 1.0 ? dyn.stay_probability : std::pow(dyn.stay_probability, dt);
  if (uniform01(rng) >= stay) {
    if (out.mode == Mode::OnRoad) {
      out.mode = Mode::OffRoad;
      // Leave the road at a random angle.
      out.heading = wrap_angle(out.heading + (uniform01(rng) - 0.5) * 2.0 * kPi);
    } else {
      const RoadPoint rp = net.project(out.position);
      out = target_on_road(net, rp, uniform01(rng) < 0.5);
    }
  }
  const bool on = out.mode == Mode::OnRoad;
  const double speed = on ? dyn.road_speed : dyn.offroad_speed;
  const double sd = on ? dyn.road_sd : dyn.offroad_sd;
  const double dist = std::max(0.0, normal(rng, speed * dt, sd * dt)) * grid.at(out.position);
  if (on) {
    advance_on_road(net, out, dist, rng);
  } else {
    out.heading = wrap_angle(out.heading + normal(rng, 0.0, dyn.heading_sd * std::sqrt(dt)));
    Point2 p = out.position + dist * Point2{std::cos(out.heading), std::sin(out.heading)};
    const double ext = net.extent();
    // Reflect off the map boundary.
    if (p.x < 0 || p.x > ext) {
      p.x = std::clamp(p.x < 0 ? -p.x : 2 * ext - p.x, 0.0, ext);
      out.heading = wrap_angle(kPi - out.heading);
    }
    if (p.y < 0 || p.y > ext) {
      p.y = std::clamp(p.y < 0 ? -p.y : 2 * ext - p.y, 0.0, ext);
      out.heading = wrap_angle(-out.heading);
    }
    out.position = p;
  }
  return out;
}

// ---------------------------------------------------------------------------

Waypoints::Waypoints(const std::vector<int>& nodes) {
  if (nodes.size() > nodes_.size()) throw IllegalMove("routes are limited to two hops");
  for (int v : nodes) nodes_[static_cast<std::size_t>(size_++)] = v;
}

RobotState robot_at(const RoadNetwork& net, int node, double heading) {
  RobotState r;
  r.node = node;
  r.position = net.node(node);
  r.heading = heading;
  return r;
}

RobotState step_robot(const RoadNetwork& net, const RobotDynamics& dyn, const RobotState& r, int destination,
                      double dt, Rng& rng) {
  RobotState out = r;
  if (out.idle()) {
    if (destination == out.node) return out;
    const auto& path = net.route(out.node, destination);
    if (path.empty()) {
      throw IllegalMove("node " + std::to_string(destination) + " is not reachable in two hops from node " +
                        std::to_string(out.node));
    }
    out.route = Waypoints(path);
  } else if (out.route.back() != destination) {
    throw IllegalMove("robot is already travelling to node " + std::to_string(out.route.back()));
  }
  if (!(dt > 0)) return out;
  double dist = std::max(0.0, normal(rng, dyn.speed * dt, dyn.sd * dt));
  while (dist > 0 && !out.route.empty()) {
    const Point2 goal = net.node(out.route.front());
    const Point2 d = goal - out.position;
    const double left = norm(d);
    if (left > 0) out.heading = std::atan2(d.y, d.x);
    if (dist < left) {
      out.position = out.position + (dist / left) * d;
      break;
    }
    dist -= left;
    out.position = goal;
    out.node = out.route.front();
    out.route.pop_front();
  }
  return out;
}

// ---------------------------------------------------------------------------

const char* robot_obs_name(RobotObs o) {
  switch (o) {
    case RobotObs::None: return "None";
    case RobotObs::Detected: return "Detected";
    case RobotObs::Captured: return "Captured";
  }
  return "?";
}

ViewCone::ViewCone(const SensorModel& s, Point2 robot, double heading)
    : sensor(&s), origin(robot), axis{std::cos(heading), std::sin(heading)}, cos_half(std::cos(s.half_cone)) {}

bool in_view_cone(const SensorModel& sensor, Point2 robot, double heading, Point2 target) {
  const ViewCone cone(sensor, robot, heading);
  const Point2 d = target - robot;
  const double len = norm(d);
  return len < 1e-9 || dot(d, cone.axis) >= len * cone.cos_half;
}

std::array<double, kRobotObsCount> sense_likelihood(const ViewCone& cone, Point2 target) {
  const Point2 d = target - cone.origin;
  const double len = norm(d);
  // cos(angle to axis) >= cos(half cone), without atan2.
  if (len >= 1e-9 && dot(d, cone.axis) < len * cone.cos_half) return {1.0, 0.0, 0.0};
  const double tau = cone.sensor->tau;
  const std::size_t band = len <= tau ? 2 : (len <= 2 * tau ? 1 : 0);
  const double other = 0.5 * (1.0 - cone.sensor->accuracy);
  std::array<double, kRobotObsCount> p{other, other, other};
  p[band] = cone.sensor->accuracy;
  return p;
}

std::array<double, kRobotObsCount> sense_likelihood(const SensorModel& sensor, Point2 robot, double heading,
                                                    Point2 target) {
  return sense_likelihood(ViewCone(sensor, robot, heading), target);
}

RobotObs sense(const SensorModel& sensor, const RobotState& r, const TargetState& t, Rng& rng) {
  const auto p = sense_likelihood(sensor, r.position, r.heading, t.position);
  const double u = uniform01(rng);
  if (u < p[0]) return RobotObs::None;
  if (u < p[0] + p[1]) return RobotObs::Detected;
  return RobotObs::Captured;
}

double reward(Point2 target, Point2 robot, bool query_asked, double tau) {
  if (distance(target, robot) <= tau) return 100.0;
  return query_asked ? -1.0 : 0.0;
}

std::optional<Point2> GlimpseSource::poll(double clock, Point2 target, Rng& rng) {
  if (!std::isfinite(period_) || clock + 1e-9 < next_) return std::nullopt;
  next_ += period_;
  return target + Point2{normal(rng, 0.0, noise_), normal(rng, 0.0, noise_)};
}

}  // namespace sketchsearch

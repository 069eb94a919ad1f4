#pragma once

#include <array>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sketchsearch/geometry.hpp"
#include "sketchsearch/random.hpp"

namespace sketchsearch {

struct SketchRecord;

enum class Mode : std::uint8_t { OnRoad, OffRoad };

/// Named reference object a (simulated) human may sketch. `delta` is the true
/// terrain multiplier inside its footprint; `radius` is the characteristic
/// size handed to the sketch emulator.
struct Landmark {
  std::string name;
  Point2 centroid;
  double radius = 40.0;
  double delta = 1.0;
};

struct RoadEdge {
  int a = 0;
  int b = 0;
  double length = 0.0;
};

/// Position along a road edge; `t` is the fraction from edge.a to edge.b.
struct RoadPoint {
  int edge = 0;
  double t = 0.0;
};

class RoadNetwork {
 public:
  RoadNetwork(std::vector<Point2> nodes, std::vector<std::pair<int, int>> edges,
              std::vector<Landmark> landmarks, double extent = 1000.0);

  /// 6x6 perturbed grid over 1000 m x 1000 m with 8 named landmarks.
  static RoadNetwork default_map();
  static RoadNetwork load(const std::string& path);
  static RoadNetwork parse(std::istream& in);
  void save(std::ostream& out) const;

  double extent() const { return extent_; }
  const std::vector<Point2>& nodes() const { return nodes_; }
  const Point2& node(int i) const { return nodes_[static_cast<std::size_t>(i)]; }
  const std::vector<RoadEdge>& edges() const { return edges_; }
  const RoadEdge& edge(int i) const { return edges_[static_cast<std::size_t>(i)]; }
  const std::vector<Landmark>& landmarks() const { return landmarks_; }
  /// Neighbor node ids, ascending.
  const std::vector<int>& neighbors(int node) const { return adjacency_[static_cast<std::size_t>(node)]; }
  int edge_between(int a, int b) const;  // -1 if not adjacent

  /// Neighbors and neighbors-of-neighbors, excluding `node`; ascending.
  const std::vector<int>& legal_moves(int node) const { return moves_[static_cast<std::size_t>(node)]; }
  /// Node sequence from `from` to `to` (excluding `from`), shortest by length
  /// among routes of at most two hops. Empty if `to` is not a legal move.
  const std::vector<int>& route(int from, int to) const;
  double route_length(int from, int to) const;

  Point2 position(RoadPoint rp) const;
  RoadPoint project(Point2 p) const;
  RoadPoint sample_road_point(Rng& rng) const;  // uniform by length
  int nearest_node(Point2 p) const;
  bool in_bounds(Point2 p) const;

 private:
  void build_moves();

  std::vector<Point2> nodes_;
  std::vector<RoadEdge> edges_;
  std::vector<Landmark> landmarks_;
  double extent_;
  double total_length_ = 0.0;
  std::vector<double> cumulative_length_;
  std::vector<std::vector<int>> adjacency_;
  std::vector<std::vector<int>> moves_;
  std::vector<std::vector<std::vector<int>>> routes_;  // [from][index in moves_]
};

/// Multiplier grid over the map; cells are `cell` meters square.
class TerrainGrid {
 public:
  explicit TerrainGrid(double extent = 1000.0, double cell = 10.0);

  double at(Point2 p) const;
  double cell_value(int ix, int iy) const { return alpha_[index(ix, iy)]; }
  void set_cell(int ix, int iy, double value);
  Point2 cell_center(int ix, int iy) const;
  int nx() const { return n_; }
  int ny() const { return n_; }
  double cell() const { return cell_; }
  const std::vector<double>& values() const { return alpha_; }
  friend bool operator==(const TerrainGrid&, const TerrainGrid&) = default;

 private:
  std::size_t index(int ix, int iy) const { return static_cast<std::size_t>(iy) * static_cast<std::size_t>(n_) + static_cast<std::size_t>(ix); }

  double extent_;
  double cell_;
  int n_;
  std::vector<double> alpha_;
};

/// Sets every cell whose centre lies in the sketch polygon to the sketch's
/// delta; sketches without a delta leave the grid untouched.
void apply_sketch_terrain(TerrainGrid& grid, const SketchRecord& sketch);
void apply_polygon_terrain(TerrainGrid& grid, const ConvexPolygon& poly, double delta);

struct TargetDynamics {
  double road_speed = 20.0;  // m/s
  double road_sd = 5.0;
  double offroad_speed = 5.0;
  double offroad_sd = 1.0;
  double stay_probability = 0.95;  // per second, both modes
  double heading_sd = 0.35;        // rad per sqrt(second), off-road
};

struct TargetState {
  Point2 position;
  Mode mode = Mode::OnRoad;
  int from = -1;  // OnRoad: travelling from node `from` to node `to`
  int to = -1;
  double heading = 0.0;  // OffRoad travel direction
};

TargetState target_on_road(const RoadNetwork& net, RoadPoint rp, bool forward);

/// One transition of the switching-mode target model. Shared by the world and
/// by every belief/planner simulation.
TargetState step_target(const RoadNetwork& net, const TargetDynamics& dyn, const TerrainGrid& grid,
                        const TargetState& t, double dt, Rng& rng);

struct RobotDynamics {
  double speed = 15.0;  // m/s
  double sd = 1.0;
};

/// Up to two remaining waypoints; fixed storage keeps simulation steps
/// allocation-free.
class Waypoints {
 public:
  Waypoints() = default;
  explicit Waypoints(const std::vector<int>& nodes);
  bool empty() const { return size_ == 0; }
  int size() const { return size_; }
  int front() const { return nodes_[0]; }
  int back() const { return nodes_[size_ - 1]; }
  void pop_front() {
    nodes_[0] = nodes_[1];
    --size_;
  }
  void clear() { size_ = 0; }

 private:
  std::array<int, 2> nodes_{};
  int size_ = 0;
};

struct RobotState {
  Point2 position;
  double heading = 0.0;
  int node = 0;     // last node reached
  Waypoints route;  // nodes still to visit for the current action

  bool idle() const { return route.empty(); }
};

RobotState robot_at(const RoadNetwork& net, int node, double heading = 0.0);

/// Advances toward `destination` along its route. Idle robots validate the
/// move first (IllegalMove unless it is a neighbor or neighbor-of-neighbor);
/// destination == current node is a zero-duration no-op.
RobotState step_robot(const RoadNetwork& net, const RobotDynamics& dyn, const RobotState& r, int destination,
                      double dt, Rng& rng);

enum class RobotObs : std::uint8_t { None = 0, Detected = 1, Captured = 2 };
inline constexpr std::size_t kRobotObsCount = 3;
const char* robot_obs_name(RobotObs o);

struct SensorModel {
  double tau = 75.0;               // capture radius, m
  double half_cone = 15.0 * 3.14159265358979323846 / 180.0;  // 30 degree view cone
  double accuracy = 0.98;
};

/// Robot pose with the cone axis precomputed, for per-particle loops.
struct ViewCone {
  ViewCone(const SensorModel& sensor, Point2 robot, double heading);
  const SensorModel* sensor;
  Point2 origin;
  Point2 axis;
  double cos_half;
};

bool in_view_cone(const SensorModel& sensor, Point2 robot, double heading, Point2 target);
std::array<double, kRobotObsCount> sense_likelihood(const ViewCone& cone, Point2 target);
/// p(o | robot pose, target position) for None/Detected/Captured.
std::array<double, kRobotObsCount> sense_likelihood(const SensorModel& sensor, Point2 robot, double heading,
                                                    Point2 target);
RobotObs sense(const SensorModel& sensor, const RobotState& r, const TargetState& t, Rng& rng);

/// 100 inside the capture radius; otherwise 0 for no query and -1 for a query.
double reward(Point2 target, Point2 robot, bool query_asked, double tau = 75.0);

/// Noisy periodic sightings of the target (stand-in for camera views).
class GlimpseSource {
 public:
  GlimpseSource(double period, double noise) : period_(period), noise_(noise), next_(period) {}
  std::optional<Point2> poll(double clock, Point2 target, Rng& rng);

 private:
  double period_;
  double noise_;
  double next_;
};

inline constexpr double kNever = std::numeric_limits<double>::infinity();

}  // namespace sketchsearch

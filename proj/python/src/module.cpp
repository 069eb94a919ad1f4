#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "sketchsearch/error.hpp"
#include "sketchsearch/harness.hpp"
#include "sketchsearch/session.hpp"
#include "sketchsearch/sim_human.hpp"

namespace py = pybind11;
using namespace sketchsearch;
using nlohmann::json;

namespace {

// Python objects cross the boundary as JSON text.
json py_to_json(const py::object& o) {
  return json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>());
}

py::object py_from_json(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

using Points = std::vector<std::pair<double, double>>;

std::vector<Point2> points_in(const Points& pts) {
  std::vector<Point2> out;
  out.reserve(pts.size());
  for (const auto& [x, y] : pts) out.push_back({x, y});
  return out;
}

Points points_out(const std::vector<Point2>& pts) {
  Points out;
  out.reserve(pts.size());
  for (const auto& p : pts) out.emplace_back(p.x, p.y);
  return out;
}

py::dict result_dict(const EpisodeResult& r) {
  py::dict d;
  d["seed"] = r.seed;
  d["captured"] = r.captured;
  d["time_to_capture"] = r.time_to_capture ? py::cast(*r.time_to_capture) : py::none();
  d["queries_asked"] = r.queries_asked;
  d["queries_answered"] = r.queries_answered;
  d["sketches"] = r.sketches;
  d["statements"] = r.statements;
  d["decisions"] = r.decisions;
  d["reward"] = r.reward;
  d["duration"] = r.duration;
  return d;
}

py::dict metrics_dict(const RunMetrics& m) {
  py::dict d;
  d["arm"] = m.arm;
  d["episode"] = m.episode;
  d["seed"] = m.seed;
  d["captured"] = m.captured;
  d["time_to_capture"] = m.time_to_capture ? py::cast(*m.time_to_capture) : py::none();
  d["queries_asked"] = m.queries_asked;
  d["queries_answered"] = m.queries_answered;
  d["sketches"] = m.sketches;
  d["error"] = m.error;
  return d;
}

EpisodeConfig episode_config(const py::object& config) {
  return config.is_none() ? EpisodeConfig{} : py_to_json(config).get<EpisodeConfig>();
}

// Owns the map a Session refers to.
struct PySession {
  PySession(const py::object& config, const std::string& mode, std::uint64_t seed) {
    SessionRequest req;
    const auto m = parse_interaction_mode(mode);
    if (!m) throw ConfigError("mode must be active, passive or both");
    req.mode = *m;
    req.seed = seed;
    req.preset = "sim";
    if (!config.is_none()) req.config = py_to_json(config);
    const EpisodeConfig cfg = session_config(req, json::object());
    net = std::make_unique<RoadNetwork>(load_map(cfg.map));
    session = std::make_unique<Session>("py", *net, cfg, &log);
  }
  std::unique_ptr<RoadNetwork> net;
  std::ostringstream log;
  std::unique_ptr<Session> session;
};

py::list frames(const std::vector<json>& fs) {
  py::list out;
  for (const auto& f : fs) out.append(py_from_json(f));
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Human-assisted dynamic target search engine";

  static py::exception<Error> base_error(m, "SketchSearchError");
  static py::exception<ConfigError> config_error(m, "ConfigError", base_error.ptr());
  static py::exception<ProtocolError> protocol_error(m, "ProtocolError", base_error.ptr());
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const ConfigError& e) {
      py::set_error(config_error, e.what());
    } catch (const ProtocolError& e) {
      py::set_error(protocol_error, e.what());
    } catch (const Error& e) {
      py::set_error(base_error, e.what());
    }
  });

  m.def(
      "build_sketch",
      [](const std::string& label, const Points& points, std::optional<double> delta) {
        const auto s = build_sketch(label, points_in(points), delta);
        py::dict d;
        d["label"] = s.label;
        d["points"] = s.points.size();
        d["hull"] = points_out(s.hull.vertices());
        d["polygon"] = points_out(s.polygon.vertices());
        d["classes"] = s.bearing.size();
        d["ring_radius"] = s.ring_radius;
        return d;
      },
      py::arg("label"), py::arg("points"), py::arg("delta") = py::none(),
      "Stroke -> convex hull -> reduced polygon -> softmax model.");

  m.def(
      "class_probability",
      [](const Points& polygon, double x, double y, double steepness) {
        return class_probability(synthesize(ConvexPolygon(points_in(polygon)), steepness), {x, y});
      },
      py::arg("polygon"), py::arg("x"), py::arg("y"), py::arg("steepness") = 5.0,
      "Softmax class probabilities (interior first) of a polygon's model at a point.");

  m.def(
      "pseud_generate",
      [](double cx, double cy, double r, double sigma, double lam, double psi, std::uint64_t seed) {
        Rng rng(seed);
        return points_out(pseud_generate({{cx, cy}, r, sigma, lam, psi}, rng).vertices());
      },
      py::arg("cx"), py::arg("cy"), py::arg("r") = 50.0, py::arg("sigma") = 5.0, py::arg("lam") = 2.0,
      py::arg("psi") = 0.2, py::arg("seed") = 1, "Simulated human sketch polygon around a centre.");

  m.def(
      "default_map",
      [] {
        const auto net = RoadNetwork::default_map();
        py::dict d;
        d["nodes"] = points_out(net.nodes());
        std::vector<std::pair<int, int>> edges;
        for (const auto& e : net.edges()) edges.emplace_back(e.a, e.b);
        d["edges"] = edges;
        py::list lms;
        for (const auto& l : net.landmarks()) {
          py::dict ld;
          ld["name"] = l.name;
          ld["centroid"] = std::make_pair(l.centroid.x, l.centroid.y);
          ld["radius"] = l.radius;
          ld["delta"] = l.delta;
          lms.append(ld);
        }
        d["landmarks"] = lms;
        return d;
      },
      "Nodes, edges and landmarks of the default road network.");

  m.def(
      "default_config", [] { return py_from_json(EpisodeConfig{}); }, "Default episode config as a dict.");

  m.def(
      "run_episode",
      [](const py::object& config, bool with_log) {
        const EpisodeConfig cfg = episode_config(config);
        const auto net = load_map(cfg.map);
        std::ostringstream log;
        EpisodeResult r;
        {
          py::gil_scoped_release release;
          r = run_episode(net, cfg, with_log ? &log : nullptr);
        }
        py::dict d = result_dict(r);
        if (with_log) d["log"] = log.str();
        return d;
      },
      py::arg("config") = py::none(), py::arg("log") = false,
      "Runs one episode from a config dict (missing keys take defaults).");

  m.def("replay_log", &replay_log, py::arg("log"), "Re-runs an episode log; returns the regenerated log.");

  m.def(
      "run_batch",
      [](const py::object& experiment, const std::optional<std::string>& out_dir) {
        const auto cfg = ExperimentConfig::from_json(py_to_json(experiment));
        std::vector<RunMetrics> rows;
        {
          py::gil_scoped_release release;
          if (out_dir) {
            rows = run_batch(cfg, *out_dir);
            write_report(cfg, rows, *out_dir);
          } else {
            rows = run_batch(cfg);
          }
        }
        py::list out;
        for (const auto& r : rows) out.append(metrics_dict(r));
        return out;
      },
      py::arg("experiment"), py::arg("out_dir") = py::none(),
      "Runs an experiment dict; with out_dir, persists metrics and reports.");

  m.def("binomial_test", &binomial_test, py::arg("k1"), py::arg("n1"), py::arg("k2"), py::arg("n2"),
        "One-sided Fisher exact p-value for p1 > p2.");
  m.def("binomial_test_two_sided", &binomial_test_two_sided, py::arg("k1"), py::arg("n1"), py::arg("k2"),
        py::arg("n2"));

  py::class_<PySession>(m, "Session", "A live-protocol session driven in-process.")
      .def(py::init<const py::object&, const std::string&, std::uint64_t>(), py::arg("config") = py::none(),
           py::arg("mode") = "both", py::arg("seed") = 1)
      .def("handle", [](PySession& s, const std::string& text) { return frames(s.session->handle(text)); })
      .def("step", [](PySession& s) { return frames(s.session->step()); })
      .def("telemetry", [](PySession& s) { return py_from_json(s.session->telemetry()); })
      .def("set_connected", [](PySession& s, bool c) { s.session->set_connected(c); })
      .def_property_readonly("done", [](const PySession& s) { return s.session->done(); })
      .def_property_readonly("log", [](const PySession& s) { return s.log.str(); });

  m.attr("PROTOCOL_VERSION") = kProtocolVersion;
}

#include <pthread.h>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "sketchsearch/error.hpp"
#include "sketchsearch/harness.hpp"
#include "sketchsearch/service.hpp"

using namespace sketchsearch;
using nlohmann::json;

namespace {

// "a.b=value": value parsed as JSON when it can be, else kept as a string.
std::pair<std::string, json> parse_assignment(const std::string& s) {
  const auto eq = s.find('=');
  if (eq == std::string::npos || eq == 0) throw ConfigError("expected path=value, got '" + s + "'");
  const std::string value = s.substr(eq + 1);
  json v = json::parse(value, nullptr, false);
  if (v.is_discarded()) v = value;
  return {s.substr(0, eq), v};
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

void print_summary(const ExperimentConfig& cfg, const std::vector<RunMetrics>& rows) {
  const auto sums = summarize_by_arm(rows);
  std::cout << fmt::format("{:<40} {:>5} {:>5} {:>8} {:>9} {:>8}\n", "arm", "runs", "caps", "ratio", "mean_ttc",
                           "queries");
  for (const auto& s : sums) {
    std::cout << fmt::format("{:<40} {:>5} {:>5} {:>8.3f} {:>9} {:>8.2f}\n", s.arm, s.runs, s.captures,
                             s.capture_ratio, s.mean_ttc ? fmt::format("{:.1f}", *s.mean_ttc) : "-",
                             s.mean_queries);
  }
  if (cfg.control) {
    for (const auto& c : compare_to_control(sums, *cfg.control)) {
      std::cout << fmt::format("{} vs {}: p(greater)={:.4g} p(two-sided)={:.4g}\n", c.arm, c.control, c.p_greater,
                               c.p_two_sided);
    }
  }
}

void run_experiment(const ExperimentConfig& cfg, const std::string& out, bool quiet) {
  Progress progress;
  if (!quiet) {
    progress = [](const RunMetrics& m, int done, int total) {
      std::cerr << fmt::format("[{}/{}] {} #{} seed={} {}{}\n", done, total, m.arm, m.episode, m.seed,
                               m.captured ? "captured" : "missed",
                               m.error.empty() ? "" : " ERROR " + m.error);
    };
  }
  const auto rows = run_batch(cfg, out, progress);
  write_report(cfg, rows, out);
  print_summary(cfg, rows);
  std::cout << "results in " << out << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Human-assisted dynamic target search: batch experiments, replay and live sessions"};
  app.require_subcommand(1);
  bool quiet = false;
  app.add_flag("-q,--quiet", quiet, "Suppress per-episode progress");

  auto* run = app.add_subcommand("run", "Run an experiment config");
  std::string run_config, run_out = "results";
  int run_threads = 0;
  run->add_option("config", run_config, "Experiment config (JSON)")->required()->check(CLI::ExistingFile);
  run->add_option("-o,--out", run_out, "Output directory");
  run->add_option("-j,--threads", run_threads, "Parallel episodes (overrides the config)");

  auto* sweep = app.add_subcommand("sweep", "Run the cartesian product of axis values over a base config");
  std::string sweep_config, sweep_out = "sweep", sweep_prefix = "cell";
  std::vector<std::string> axes, sets;
  int sweep_episodes = 20, sweep_threads = 1;
  std::uint64_t sweep_seed = 1;
  sweep->add_option("config", sweep_config, "Experiment config whose 'base' is swept")->check(CLI::ExistingFile);
  sweep->add_option("-a,--axis", axes, "path=[v1,v2,...], e.g. human.eta=[0.3,0.5,0.7]")->required();
  sweep->add_option("-s,--set", sets, "path=value applied to every cell");
  sweep->add_option("-n,--episodes", sweep_episodes, "Episodes per cell");
  sweep->add_option("--seed", sweep_seed, "Base seed per cell");
  sweep->add_option("--prefix", sweep_prefix, "Arm name prefix");
  sweep->add_option("-o,--out", sweep_out, "Output directory");
  sweep->add_option("-j,--threads", sweep_threads, "Parallel episodes");

  auto* replay = app.add_subcommand("replay", "Re-run an episode log and check it reproduces");
  std::string replay_path, replay_out;
  replay->add_option("log", replay_path, "Episode log (JSON lines)")->required()->check(CLI::ExistingFile);
  replay->add_option("-o,--out", replay_out, "Write the regenerated log here");

  auto* report = app.add_subcommand("report", "Summarize a results directory");
  std::string report_dir;
  report->add_option("dir", report_dir, "Directory holding metrics.csv and experiment.json")
      ->required()
      ->check(CLI::ExistingDirectory);

  auto* episode = app.add_subcommand("episode", "Run one episode and print its result");
  std::vector<std::string> ep_sets;
  std::string ep_log, ep_preset = "sim";
  std::uint64_t ep_seed = 1;
  episode->add_option("--seed", ep_seed, "Episode seed");
  episode->add_option("--preset", ep_preset, "sim or study");
  episode->add_option("-s,--set", ep_sets, "path=value config override");
  episode->add_option("--log", ep_log, "Write the episode log here");

  auto* serve = app.add_subcommand("serve", "Serve live sessions over websocket");
  ServiceConfig svc;
  std::string serve_patch;
  serve->add_option("--address", svc.address, "Bind address");
  serve->add_option("-p,--port", svc.port, "Port (0 picks one)");
  serve->add_option("-j,--threads", svc.threads, "I/O threads");
  serve->add_option("--speed", svc.speed, "Engine seconds per wall second (0 = unpaced)");
  serve->add_option("--heartbeat", svc.heartbeat, "Heartbeat period in seconds");
  serve->add_option("--queue", svc.queue_limit, "Outbound frame queue per client");
  serve->add_option("--log-dir", svc.log_dir, "Directory for episode logs and transcripts");
  serve->add_option("--config", serve_patch, "Episode config patch applied to every session")
      ->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      auto cfg = ExperimentConfig::load(run_config);
      if (run_threads > 0) cfg.threads = run_threads;
      run_experiment(cfg, run_out, quiet);
    } else if (*sweep) {
      json j = json::object();
      if (!sweep_config.empty()) j = read_json(sweep_config);
      j.erase("arms");
      json s = {{"prefix", sweep_prefix}, {"episodes", sweep_episodes}, {"seed", sweep_seed}, {"axes", json::object()},
                {"config", json::object()}};
      for (const auto& a : axes) {
        auto [path, values] = parse_assignment(a);
        if (!values.is_array()) values = json::array({values});
        s["axes"][path] = values;
      }
      for (const auto& a : sets) {
        const auto [path, value] = parse_assignment(a);
        set_path(s["config"], path, value);
      }
      j["sweep"] = s;
      j["threads"] = sweep_threads;
      j.erase("control");
      run_experiment(ExperimentConfig::from_json(j), sweep_out, quiet);
    } else if (*replay) {
      std::ifstream in(replay_path);
      std::stringstream buf;
      buf << in.rdbuf();
      const std::string original = buf.str();
      const std::string again = replay_log(original);
      if (!replay_out.empty()) std::ofstream(replay_out) << again;
      if (again == original) {
        std::cout << "replay identical (" << std::count(original.begin(), original.end(), '\n') << " events)\n";
        return 0;
      }
      std::istringstream a(original), b(again);
      std::string la, lb;
      int line = 1;
      while (std::getline(a, la) && std::getline(b, lb) && la == lb) ++line;
      std::cout << "replay diverged at line " << line << '\n';
      return 1;
    } else if (*report) {
      const auto dir = std::filesystem::path(report_dir);
      const auto cfg = ExperimentConfig::from_json(read_json((dir / "experiment.json").string()));
      const auto rows = read_metrics(dir / "metrics.csv");
      if (rows.empty()) throw ConfigError("no metrics in " + report_dir);
      write_report(cfg, rows, dir);
      print_summary(cfg, rows);
    } else if (*episode) {
      json j = preset_config(ep_preset);
      for (const auto& a : ep_sets) {
        const auto [path, value] = parse_assignment(a);
        set_path(j, path, value);
      }
      EpisodeConfig c = j.get<EpisodeConfig>();
      c.seed = ep_seed;
      if (c.source == HumanSource::Live) throw ConfigError("live episodes need the serve verb");
      std::ofstream log;
      if (!ep_log.empty()) log.open(ep_log);
      const auto r = run_episode(load_map(c.map), c, ep_log.empty() ? nullptr : &log);
      std::cout << json{{"seed", r.seed},
                        {"captured", r.captured},
                        {"time_to_capture", r.time_to_capture ? json(*r.time_to_capture) : json(nullptr)},
                        {"queries_asked", r.queries_asked},
                        {"queries_answered", r.queries_answered},
                        {"sketches", r.sketches},
                        {"statements", r.statements},
                        {"decisions", r.decisions},
                        {"reward", r.reward}}
                       .dump()
                << '\n';
    } else if (*serve) {
      if (!serve_patch.empty()) svc.episode_patch = read_json(serve_patch);
      // Worker threads inherit the blocked mask; the main thread waits for the signal.
      sigset_t signals;
      sigemptyset(&signals);
      sigaddset(&signals, SIGINT);
      sigaddset(&signals, SIGTERM);
      pthread_sigmask(SIG_BLOCK, &signals, nullptr);
      Service service(svc);
      const auto port = service.start();
      spdlog::info("listening on ws://{}:{}", svc.address, port);
      int sig = 0;
      sigwait(&signals, &sig);
      spdlog::info("shutting down");
      service.stop();
    }
  } catch (const Error& e) {
    std::cerr << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

#include "sketchsearch/harness.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "sketchsearch/error.hpp"

namespace sketchsearch {

using nlohmann::json;

namespace {

void check_name(const std::string& name) {
  if (name.empty()) throw ConfigError("arm names must be non-empty");
  if (name.find_first_of(",\"\n\r/\\") != std::string::npos) {
    throw ConfigError("arm name '" + name + "' may not contain commas, quotes, slashes or newlines");
  }
}

Arm arm_from_json(const json& a) {
  Arm arm;
  arm.name = a.at("name").get<std::string>();
  if (a.contains("config")) arm.overrides = a.at("config");
  arm.episodes = a.value("episodes", 10);
  arm.base_seed = a.value("seed", std::uint64_t{1});
  if (a.contains("axes")) arm.axes = a.at("axes").get<std::map<std::string, std::string>>();
  return arm;
}

json arm_to_json(const Arm& a) {
  return {{"name", a.name}, {"config", a.overrides}, {"episodes", a.episodes}, {"seed", a.base_seed}, {"axes", a.axes}};
}

std::string axis_label(const json& v) {
  if (v.is_string()) return v.get<std::string>();
  std::ostringstream s;
  s << v.dump();
  return s.str();
}

void expand_sweep(const json& sweep, std::vector<Arm>& arms) {
  const json& axes = sweep.at("axes");
  if (!axes.is_object() || axes.empty()) throw ConfigError("sweep needs at least one axis");
  std::vector<std::pair<std::string, std::vector<json>>> dims;
  for (const auto& [path, values] : axes.items()) {
    if (!values.is_array() || values.empty()) throw ConfigError("sweep axis '" + path + "' needs a list of values");
    dims.emplace_back(path, std::vector<json>(values.begin(), values.end()));
  }
  const std::string prefix = sweep.value("prefix", std::string("cell"));
  const json common = sweep.value("config", json::object());
  std::vector<std::size_t> idx(dims.size(), 0);
  while (true) {
    Arm arm;
    arm.overrides = common;
    arm.episodes = sweep.value("episodes", 20);
    arm.base_seed = sweep.value("seed", std::uint64_t{1});
    std::string name = prefix;
    for (std::size_t d = 0; d < dims.size(); ++d) {
      const json& v = dims[d].second[idx[d]];
      set_path(arm.overrides, dims[d].first, v);
      arm.axes[dims[d].first] = axis_label(v);
      name += "|" + dims[d].first + "=" + axis_label(v);
    }
    arm.name = name;
    arms.push_back(std::move(arm));
    std::size_t d = 0;
    while (d < dims.size() && ++idx[d] == dims[d].second.size()) idx[d++] = 0;
    if (d == dims.size()) break;
  }
}

std::string fmt_optional(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream s;
  s.precision(10);
  s << *v;
  return s.str();
}

std::string fmt(double v) {
  std::ostringstream s;
  s.precision(10);
  s << v;
  return s.str();
}

double log_choose(int n, int k) { return std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0); }

// Hypergeometric pmf of x successes in arm 1 given the margins.
double hyper(int x, int n1, int n2, int total) {
  return std::exp(log_choose(n1, x) + log_choose(n2, total - x) - log_choose(n1 + n2, total));
}

void validate_counts(int k1, int n1, int k2, int n2) {
  if (n1 < 0 || n2 < 0 || k1 < 0 || k2 < 0 || k1 > n1 || k2 > n2) {
    throw ConfigError("binomial test needs 0 <= k <= n for both arms");
  }
}

RunMetrics run_one(const ExperimentConfig& config, const Arm& arm, int index, const RoadNetwork& net,
                   const std::filesystem::path* log_dir) {
  RunMetrics m;
  m.arm = arm.name;
  m.episode = index;
  try {
    const EpisodeConfig ec = config.episode_config(arm, index);
    m.seed = ec.seed;
    EpisodeResult r;
    if (log_dir != nullptr) {
      std::ofstream log(*log_dir / (arm.name + "-" + std::to_string(index) + ".jsonl"));
      r = run_episode(net, ec, &log);
    } else {
      r = run_episode(net, ec);
    }
    m.captured = r.captured;
    m.time_to_capture = r.time_to_capture;
    m.queries_asked = r.queries_asked;
    m.queries_answered = r.queries_answered;
    m.sketches = r.sketches;
    m.statements = r.statements;
    m.decisions = r.decisions;
    m.reward = r.reward;
  } catch (const std::exception& e) {
    m.error = e.what();
    std::replace_if(m.error.begin(), m.error.end(), [](char c) { return c == ',' || c == '\n' || c == '"'; }, ';');
  }
  return m;
}

}  // namespace

void set_path(json& j, const std::string& dotted, const json& value) {
  json* node = &j;
  std::size_t start = 0;
  while (true) {
    const auto dot = dotted.find('.', start);
    const std::string key = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw ConfigError("bad config path '" + dotted + "'");
    if (!node->is_object()) *node = json::object();
    if (dot == std::string::npos) {
      (*node)[key] = value;
      return;
    }
    node = &(*node)[key];
    start = dot + 1;
  }
}

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("experiment config must be an object");
  ExperimentConfig c;
  try {
    c.name = j.value("name", c.name);
    if (j.contains("base")) c.base = j.at("base");
    c.threads = std::max(1, j.value("threads", 1));
    c.write_logs = j.value("write_logs", false);
    if (j.contains("control") && !j.at("control").is_null()) c.control = j.at("control").get<std::string>();
    if (j.contains("arms")) {
      for (const auto& a : j.at("arms")) c.arms.push_back(arm_from_json(a));
    }
    if (j.contains("sweep")) expand_sweep(j.at("sweep"), c.arms);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("experiment config: ") + e.what());
  }
  if (c.arms.empty()) throw ConfigError("experiment has no arms");
  std::set<std::string> names;
  for (const auto& a : c.arms) {
    check_name(a.name);
    if (!names.insert(a.name).second) throw ConfigError("duplicate arm name '" + a.name + "'");
    if (a.episodes < 0) throw ConfigError("arm '" + a.name + "' has a negative episode count");
    c.episode_config(a, 0);  // validates the merged config
  }
  if (c.control && !names.contains(*c.control)) throw ConfigError("control arm '" + *c.control + "' not found");
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open experiment config " + path.string());
  try {
    return from_json(json::parse(in));
  } catch (const json::parse_error& e) {
    throw ConfigError("experiment config " + path.string() + ": " + e.what());
  }
}

EpisodeConfig ExperimentConfig::episode_config(const Arm& arm, int index) const {
  json j = EpisodeConfig{};
  j.merge_patch(base);
  j.merge_patch(arm.overrides);
  EpisodeConfig c = j.get<EpisodeConfig>();
  c.seed = arm.base_seed + static_cast<std::uint64_t>(index);
  return c;
}

std::string metrics_csv_header() {
  return "arm,episode,seed,captured,time_to_capture,queries_asked,queries_answered,sketches,statements,decisions,"
         "reward,error";
}

std::string to_csv(const RunMetrics& m) {
  std::ostringstream s;
  s << m.arm << ',' << m.episode << ',' << m.seed << ',' << (m.captured ? 1 : 0) << ','
    << fmt_optional(m.time_to_capture) << ',' << m.queries_asked << ',' << m.queries_answered << ',' << m.sketches
    << ',' << m.statements << ',' << m.decisions << ',' << fmt(m.reward) << ',' << m.error;
  return s.str();
}

RunMetrics metrics_from_csv(const std::string& line) {
  std::vector<std::string> f;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) f.push_back(cell);
  if (!line.empty() && line.back() == ',') f.emplace_back();
  if (f.size() != 12) throw ConfigError("metrics row has " + std::to_string(f.size()) + " fields, expected 12");
  try {
    RunMetrics m;
    m.arm = f[0];
    m.episode = std::stoi(f[1]);
    m.seed = std::stoull(f[2]);
    m.captured = f[3] == "1";
    if (!f[4].empty()) m.time_to_capture = std::stod(f[4]);
    m.queries_asked = std::stoi(f[5]);
    m.queries_answered = std::stoi(f[6]);
    m.sketches = std::stoi(f[7]);
    m.statements = std::stoi(f[8]);
    m.decisions = std::stoi(f[9]);
    m.reward = std::stod(f[10]);
    m.error = f[11];
    return m;
  } catch (const std::logic_error&) {
    throw ConfigError("malformed metrics row: " + line);
  }
}

std::vector<RunMetrics> read_metrics(const std::filesystem::path& csv) {
  std::vector<RunMetrics> rows;
  std::ifstream in(csv);
  if (!in) return rows;
  std::string line;
  if (!std::getline(in, line)) return rows;
  if (line != metrics_csv_header()) throw ConfigError(csv.string() + " is not a metrics table");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      rows.push_back(metrics_from_csv(line));
    } catch (const ConfigError&) {
      // A torn final line from an interrupted run; that episode reruns.
    }
  }
  return rows;
}

std::vector<RunMetrics> run_batch(const ExperimentConfig& config, const std::filesystem::path& out_dir,
                                  const Progress& progress) {
  std::filesystem::create_directories(out_dir);
  const auto csv = out_dir / "metrics.csv";
  std::map<std::pair<std::string, int>, RunMetrics> done;
  for (auto& m : read_metrics(csv)) done[{m.arm, m.episode}] = std::move(m);

  {
    std::ofstream echo(out_dir / "experiment.json");
    json arms = json::array();
    for (const auto& a : config.arms) arms.push_back(arm_to_json(a));
    echo << json{{"name", config.name}, {"base", config.base}, {"arms", arms},
                 {"control", config.control ? json(*config.control) : json(nullptr)}}
                .dump(2)
         << '\n';
  }
  // Rewrite the table with only the intact rows before appending.
  {
    std::ofstream out(csv, std::ios::trunc);
    out << metrics_csv_header() << '\n';
    for (const auto& [key, m] : done) out << to_csv(m) << '\n';
  }
  std::filesystem::path log_dir = out_dir / "logs";
  if (config.write_logs) std::filesystem::create_directories(log_dir);

  std::map<std::string, RoadNetwork> maps;
  std::vector<std::pair<const Arm*, int>> todo;
  int total = 0;
  for (const auto& arm : config.arms) {
    const std::string map = config.episode_config(arm, 0).map;
    if (!maps.contains(map)) maps.emplace(map, load_map(map));
    for (int i = 0; i < arm.episodes; ++i) {
      ++total;
      if (!done.contains({arm.name, i})) todo.emplace_back(&arm, i);
    }
  }

  std::ofstream out(csv, std::ios::app);
  std::mutex mu;
  std::atomic<std::size_t> next{0};
  int finished = total - static_cast<int>(todo.size());
  auto worker = [&] {
    while (true) {
      const std::size_t k = next.fetch_add(1);
      if (k >= todo.size()) return;
      const auto [arm, i] = todo[k];
      const RoadNetwork& net = maps.at(config.episode_config(*arm, 0).map);
      RunMetrics m = run_one(config, *arm, i, net, config.write_logs ? &log_dir : nullptr);
      std::lock_guard lock(mu);
      out << to_csv(m) << '\n';
      out.flush();
      ++finished;
      if (progress) progress(m, finished, total);
      done[{m.arm, m.episode}] = std::move(m);
    }
  };
  const int threads = std::min<int>(config.threads, static_cast<int>(std::max<std::size_t>(todo.size(), 1)));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  std::vector<RunMetrics> rows;
  for (const auto& arm : config.arms) {
    for (int i = 0; i < arm.episodes; ++i) rows.push_back(done.at({arm.name, i}));
  }
  return rows;
}

std::vector<RunMetrics> run_batch(const ExperimentConfig& config) {
  std::map<std::string, RoadNetwork> maps;
  std::vector<RunMetrics> rows;
  for (const auto& arm : config.arms) {
    const std::string map = config.episode_config(arm, 0).map;
    if (!maps.contains(map)) maps.emplace(map, load_map(map));
    for (int i = 0; i < arm.episodes; ++i) rows.push_back(run_one(config, arm, i, maps.at(map), nullptr));
  }
  return rows;
}

double binomial_test(int k1, int n1, int k2, int n2) {
  validate_counts(k1, n1, k2, n2);
  const int total = k1 + k2;
  if (total == 0 || total == n1 + n2) return 1.0;
  double p = 0.0;
  for (int x = k1; x <= std::min(total, n1); ++x) {
    if (total - x <= n2) p += hyper(x, n1, n2, total);
  }
  return std::clamp(p, 0.0, 1.0);
}

double binomial_test_two_sided(int k1, int n1, int k2, int n2) {
  validate_counts(k1, n1, k2, n2);
  const int total = k1 + k2;
  if (total == 0 || total == n1 + n2) return 1.0;
  const double observed = hyper(k1, n1, n2, total);
  double p = 0.0;
  for (int x = std::max(0, total - n2); x <= std::min(total, n1); ++x) {
    const double px = hyper(x, n1, n2, total);
    if (px <= observed * (1.0 + 1e-7)) p += px;
  }
  return std::clamp(p, 0.0, 1.0);
}

ArmSummary summarize(const std::string& arm, const std::vector<RunMetrics>& rows) {
  ArmSummary s;
  s.arm = arm;
  std::vector<double> ttc;
  for (const auto& r : rows) {
    if (!r.error.empty()) {
      ++s.failures;
      continue;
    }
    ++s.runs;
    s.mean_queries += r.queries_asked;
    s.mean_answers += r.queries_answered;
    s.mean_sketches += r.sketches;
    if (r.captured) {
      ++s.captures;
      if (r.time_to_capture) ttc.push_back(*r.time_to_capture);
    }
  }
  if (s.runs > 0) {
    s.capture_ratio = static_cast<double>(s.captures) / s.runs;
    s.mean_queries /= s.runs;
    s.mean_answers /= s.runs;
    s.mean_sketches /= s.runs;
  }
  if (!ttc.empty()) {
    std::sort(ttc.begin(), ttc.end());
    double sum = 0.0;
    for (double t : ttc) sum += t;
    s.mean_ttc = sum / static_cast<double>(ttc.size());
    const std::size_t n = ttc.size();
    s.median_ttc = n % 2 == 1 ? ttc[n / 2] : 0.5 * (ttc[n / 2 - 1] + ttc[n / 2]);
  }
  return s;
}

std::vector<ArmSummary> summarize_by_arm(const std::vector<RunMetrics>& rows) {
  std::vector<std::string> order;
  std::map<std::string, std::vector<RunMetrics>> by;
  for (const auto& r : rows) {
    if (!by.contains(r.arm)) order.push_back(r.arm);
    by[r.arm].push_back(r);
  }
  std::vector<ArmSummary> out;
  for (const auto& a : order) out.push_back(summarize(a, by[a]));
  return out;
}

std::vector<Comparison> compare_to_control(const std::vector<ArmSummary>& summaries, const std::string& control) {
  const auto c = std::find_if(summaries.begin(), summaries.end(), [&](const auto& s) { return s.arm == control; });
  if (c == summaries.end()) throw ConfigError("control arm '" + control + "' has no results");
  std::vector<Comparison> out;
  for (const auto& s : summaries) {
    if (s.arm == control) continue;
    out.push_back({s.arm, control, binomial_test(s.captures, s.runs, c->captures, c->runs),
                   binomial_test_two_sided(s.captures, s.runs, c->captures, c->runs)});
  }
  return out;
}

std::map<std::string, ArmSummary> marginal(const ExperimentConfig& config, const std::vector<RunMetrics>& rows,
                                           const std::string& axis) {
  std::map<std::string, std::string> value_of;
  for (const auto& a : config.arms) {
    if (auto it = a.axes.find(axis); it != a.axes.end()) value_of[a.name] = it->second;
  }
  std::map<std::string, std::vector<RunMetrics>> by;
  for (const auto& r : rows) {
    if (auto it = value_of.find(r.arm); it != value_of.end()) by[it->second].push_back(r);
  }
  std::map<std::string, ArmSummary> out;
  for (const auto& [v, rs] : by) out[v] = summarize(axis + "=" + v, rs);
  return out;
}

void write_report(const ExperimentConfig& config, const std::vector<RunMetrics>& rows,
                  const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  const auto summaries = summarize_by_arm(rows);
  std::ofstream s(out_dir / "summary.csv");
  s << "arm,runs,failures,captures,capture_ratio,mean_ttc,median_ttc,mean_queries,mean_answers,mean_sketches\n";
  for (const auto& a : summaries) {
    s << a.arm << ',' << a.runs << ',' << a.failures << ',' << a.captures << ',' << fmt(a.capture_ratio) << ','
      << fmt_optional(a.mean_ttc) << ',' << fmt_optional(a.median_ttc) << ',' << fmt(a.mean_queries) << ','
      << fmt(a.mean_answers) << ',' << fmt(a.mean_sketches) << '\n';
  }
  if (config.control) {
    std::ofstream c(out_dir / "comparisons.csv");
    c << "arm,control,p_greater,p_two_sided\n";
    for (const auto& cmp : compare_to_control(summaries, *config.control)) {
      c << cmp.arm << ',' << cmp.control << ',' << fmt(cmp.p_greater) << ',' << fmt(cmp.p_two_sided) << '\n';
    }
  }
  std::set<std::string> axes;
  for (const auto& a : config.arms) {
    for (const auto& [k, v] : a.axes) axes.insert(k);
  }
  if (!axes.empty()) {
    std::ofstream m(out_dir / "marginals.csv");
    m << "axis,value,runs,captures,capture_ratio,mean_ttc\n";
    for (const auto& axis : axes) {
      for (const auto& [v, sum] : marginal(config, rows, axis)) {
        m << axis << ',' << v << ',' << sum.runs << ',' << sum.captures << ',' << fmt(sum.capture_ratio) << ','
          << fmt_optional(sum.mean_ttc) << '\n';
      }
    }
  }
}

}  // namespace sketchsearch

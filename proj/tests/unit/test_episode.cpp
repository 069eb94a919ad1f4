#include <doctest.h>

#include <sstream>

#include "detect_scenario.hpp"
#include "sketchsearch/episode.hpp"
#include "sketchsearch/error.hpp"

using namespace sketchsearch;

namespace {

EpisodeConfig quick(std::uint64_t seed) {
  EpisodeConfig c;
  c.seed = seed;
  c.particles = 2000;
  c.t_max = 200.0;
  c.planner.sims_per_second = 5.0;
  return c;
}

std::vector<nlohmann::json> lines(const std::string& text) {
  std::vector<nlohmann::json> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) out.push_back(nlohmann::json::parse(line));
  }
  return out;
}

}  // namespace

TEST_SUITE("episode") {
  TEST_CASE("seeded runs replay byte for byte") {
    const auto net = RoadNetwork::default_map();
    auto cfg = quick(11);
    cfg.source = HumanSource::Simulated;
    cfg.human.sketch_period = 5.0;
    cfg.log_ticks = true;
    std::ostringstream log;
    const auto r = run_episode(net, cfg, &log);
    CHECK(r.sketches > 0);
    CHECK(replay_log(log.str()) == log.str());

    std::ostringstream again;
    run_episode(net, cfg, &again);
    CHECK(again.str() == log.str());
  }

  TEST_CASE("without a human only Null is ever asked") {
    const auto net = RoadNetwork::default_map();
    std::ostringstream log;
    const auto r = run_episode(net, quick(3), &log);
    CHECK(r.queries_asked == 0);
    CHECK(r.sketches == 0);
    for (const auto& ev : lines(log.str())) {
      if (ev["type"] == "decision") CHECK(ev["query"].is_null());
    }
  }

  TEST_CASE("an infinite sketch period reproduces the no-human run") {
    const auto net = RoadNetwork::default_map();
    for (std::uint64_t seed : {1, 2, 3}) {
      auto none = quick(seed);
      auto never = quick(seed);
      never.source = HumanSource::Simulated;
      never.human.sketch_period = kNever;
      const auto a = run_episode(net, none);
      const auto b = run_episode(net, never);
      CHECK(a.captured == b.captured);
      CHECK(a.duration == b.duration);
      CHECK(b.queries_asked == 0);
    }
  }

  TEST_CASE("live inputs are logged and replay identically") {
    const auto net = RoadNetwork::default_map();
    auto cfg = quick(5);
    cfg.source = HumanSource::Live;
    cfg.t_max = 120.0;
    std::ostringstream log;
    Episode ep(net, cfg, &log);
    for (int i = 0; i < 5; ++i) ep.tick();
    const auto& sk = ep.submit_sketch("Barn", {{400, 400}, {480, 400}, {480, 470}, {400, 470}}, 0.5);
    CHECK(sk.polygon.size() >= 3);
    CHECK(ep.codebook().queries().size() == 6);
    CHECK(ep.terrain().at({440, 435}) == 0.5);
    CHECK_THROWS_AS(ep.submit_sketch("Barn", {{0, 0}, {10, 0}, {10, 10}}, std::nullopt), DuplicateLabel);
    CHECK_THROWS_AS(ep.submit_statement({true, Relation::N, "Nowhere"}), UnknownReference);
    ep.submit_statement({false, Relation::E, "Barn"});
    CHECK_FALSE(ep.submit_answer(999, HumanAnswer::Yes));

    int answered = 0;
    while (!ep.done()) {
      ep.tick();
      for (const auto& q : ep.take_issued_queries()) {
        if (answered++ % 2 == 0) CHECK(ep.submit_answer(q.id, HumanAnswer::No));
      }
    }
    const auto text = log.str();
    CHECK(replay_log(text) == text);
  }

  TEST_CASE("unanswered live queries expire to Null") {
    const auto net = RoadNetwork::default_map();
    auto cfg = quick(9);
    cfg.source = HumanSource::Live;
    cfg.t_max = 300.0;
    cfg.query_timeout = 15.0;
    std::ostringstream log;
    Episode ep(net, cfg, &log);
    ep.tick();
    ep.submit_sketch("Hill", {{450, 450}, {550, 450}, {550, 550}, {450, 550}}, std::nullopt);
    std::optional<PendingQuery> first;
    while (!ep.done() && !first) {
      ep.tick();
      auto qs = ep.take_issued_queries();
      if (!qs.empty()) first = qs.front();
    }
    REQUIRE(first);
    CHECK(first->deadline == doctest::Approx(first->asked + 15.0));
    bool expired = false;
    while (!ep.done() && ep.clock() < first->deadline + 1.0) ep.tick();
    for (const auto& ev : lines(log.str())) {
      if (ev["type"] == "answer" && ev["id"] == first->id) {
        expired = ev["answer"] == "Null";
        break;
      }
    }
    CHECK(expired);
    CHECK_FALSE(ep.submit_answer(first->id, HumanAnswer::Yes));
  }

  TEST_CASE("config round-trips through JSON and rejects bad values") {
    EpisodeConfig c;
    c.seed = 42;
    c.source = HumanSource::Simulated;
    c.human.sketch_period = kNever;
    c.human.eta = 0.7;
    c.planner.mode = PlannerMode::Blind;
    c.assumed = AnswerModel{0.5, 0.6};
    const nlohmann::json j = c;
    CHECK(j["human"]["sketch_period"] == "inf");
    const auto back = j.get<EpisodeConfig>();
    CHECK(back.seed == 42);
    CHECK(back.human.sketch_period == kNever);
    CHECK(back.human.eta == 0.7);
    CHECK(back.planner.mode == PlannerMode::Blind);
    REQUIRE(back.assumed);
    CHECK(back.assumed->xi == 0.6);
    CHECK(nlohmann::json(back) == j);

    CHECK_THROWS_AS(nlohmann::json({{"human", {{"eta", 1.5}}}}).get<EpisodeConfig>(), ConfigError);
    CHECK_THROWS_AS(nlohmann::json({{"planner", {{"mode", "psychic"}}}}).get<EpisodeConfig>(), ConfigError);
    CHECK_THROWS_AS(nlohmann::json({{"human", {{"sketch_period", -3}}}}).get<EpisodeConfig>(), ConfigError);
    CHECK_THROWS_AS(nlohmann::json::array().get<EpisodeConfig>(), ConfigError);
  }

  TEST_CASE("malformed logs are rejected") {
    CHECK_THROWS_AS(replay_log("not json\n"), ProtocolError);
    CHECK_THROWS_AS(replay_log("{\"type\":\"decision\"}\n"), ProtocolError);
  }

  TEST_CASE("predictive plans act on a detection one decision before blind ones") {
    const auto o = scenario::detect_on_arrival(1);
    CHECK(o.p_detected > 0.2);
    CHECK(o.predictive_move == o.east);
    CHECK(o.blind_move == o.south);
    CHECK(o.blind_next_move == o.east);
  }
}

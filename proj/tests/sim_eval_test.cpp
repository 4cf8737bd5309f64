#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <sstream>
#include <tuple>

#include "fixtures.hpp"
#include "pqr/eval.hpp"
#include "pqr/io.hpp"
#include "pqr/lp.hpp"
#include "pqr/replay.hpp"
#include "pqr/sim.hpp"

using namespace pqr;
using fixtures::at;
using fixtures::baggage;

namespace {

using Row = std::tuple<Millis, std::string, std::string, std::string, std::string>;

std::vector<Row> rows(const MultiEntityLog& log) {
  std::vector<Row> out;
  for (const auto& e : log.events())
    out.emplace_back(*e.time, e.pid.value_or(""), e.act, e.rid.value_or(""), e.qid.value_or(""));
  std::sort(out.begin(), out.end());
  return out;
}

Scenario pair_scenario() { return load_scenario(fixtures::data("scenarios/baggage_pair.json")); }

std::vector<std::string> sensors_of(const Scenario& sc) { return sc.extra.at("sensors").get<std::vector<std::string>>(); }

const PQRSystem& terminal() {
  static const PQRSystem s = load_model(fixtures::data("models/terminal.json"));
  return s;
}

MultiEntityLog event_log(std::vector<Event> ev, std::set<EntityType> et = {EntityType::pid}) {
  return MultiEntityLog(std::move(ev), std::move(et));
}

Event ev(std::string id, std::string pid, std::string act, std::optional<Millis> t) {
  Event e;
  e.id = std::move(id);
  e.pid = std::move(pid);
  e.act = std::move(act);
  e.time = t;
  return e;
}

}  // namespace

TEST(Simulate, PairReproducesCompleteLog) {
  auto sc = pair_scenario();
  auto log = simulate(baggage(), sc);
  EXPECT_EQ(rows(log), rows(fixtures::complete_log()));
  for (std::size_t i = 1; i < log.size(); ++i) EXPECT_LE(*log.events()[i - 1].time, *log.events()[i].time);
  EXPECT_TRUE(check_completeness(log).monotone);
}

TEST(Simulate, NoArrivalsGivesEmptyLog) {
  auto sc = pair_scenario();
  sc.arrivals.clear();
  auto log = simulate(baggage(), sc);
  EXPECT_EQ(log.size(), 0u);
}

TEST(Simulate, BlockageShiftsDequeues) {
  auto sc = pair_scenario();
  sc.blockages.push_back({"m4:d1", 40000, 60000});
  auto log = simulate(baggage(), sc);
  Millis end = sc.start + 100000;
  std::vector<std::string> order;
  for (const auto& e : log.events())
    if (e.act == "d1_s") {
      EXPECT_GE(*e.time, end);
      order.push_back(*e.pid);
    }
  EXPECT_EQ(order, (std::vector<std::string>{"50", "51"}));
  EXPECT_TRUE(replay_log(baggage(), log).accepted);
}

TEST(Simulate, DeterministicPerSeed) {
  auto sc = load_scenario(fixtures::data("scenarios/regular.json"));
  sc.arrivals.resize(2);
  for (auto& a : sc.arrivals) a.count = 30;
  auto a = log_to_string(simulate(terminal(), sc, 5));
  auto b = log_to_string(simulate(terminal(), sc, 5));
  auto c = log_to_string(simulate(terminal(), sc, 6));
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST(Simulate, RejectsUnknownBlockageQueue) {
  auto sc = pair_scenario();
  sc.blockages.push_back({"nope", 0, 1000});
  EXPECT_THROW(simulate(baggage(), sc), ModelError);
}

// Simulated logs are always accepted by replay, and their partial logs repair.
TEST(Simulate, FuzzReplayAccepted) {
  auto base = load_scenario(fixtures::data("scenarios/regular.json"));
  std::mt19937_64 rng(11);
  for (int k = 0; k < 20; ++k) {
    auto sc = base;
    for (auto& a : sc.arrivals) a.count = 5 + rng() % 10;
    sc.slack = {0.0, 0.3, 0.3};
    if (k % 3 == 0) sc.blockages.push_back({"m2:d1", 60000, 120000});
    auto log = simulate(terminal(), sc, rng());
    auto r = replay_log(terminal(), log);
    ASSERT_TRUE(r.accepted) << "run " << k;
    auto part = partialize(log, SensorSet::parse(sensors_of(sc)));
    auto rep = repair(part, terminal());
    ASSERT_TRUE(rep.solution.feasible) << rep.solution.message;
  }
}

TEST(Partialize, QualifiedSensorsGivePartialFixture) {
  auto sc = pair_scenario();
  auto part = partialize(fixtures::complete_log(), SensorSet::parse(sensors_of(sc)));
  std::ifstream in(fixtures::data("logs/partial.csv"));
  std::stringstream want;
  want << in.rdbuf();
  EXPECT_EQ(log_to_string(part), want.str());
}

TEST(Partialize, GlobalSensorsGiveSuperset) {
  auto part = partialize(fixtures::complete_log(),
                         SensorSet::parse({"m3_s", "m4_s", "d1_s", "d2_s", "s1_s", "s2_s", "c3_c", "c4_c"}));
  std::set<std::string> ids;
  for (const auto& e : part.events()) ids.insert(e.id);
  auto want = fixtures::partial_log();
  for (const auto& e : want.events()) EXPECT_TRUE(ids.count(e.id)) << e.id;
  EXPECT_GT(part.size(), want.size());
}

TEST(Partialize, AllLabelsKeepsEverything) {
  auto full = fixtures::complete_log();
  std::vector<std::string> labels;
  for (const auto& e : full.events()) labels.push_back(e.act);
  auto part = partialize(full, SensorSet::parse(labels));
  ASSERT_EQ(part.size(), full.size());
  EXPECT_EQ(part.entity_types(), std::set<EntityType>{EntityType::pid});
  for (std::size_t i = 0; i < full.size(); ++i) {
    EXPECT_EQ(part.events()[i].id, full.events()[i].id);
    EXPECT_FALSE(part.events()[i].rid);
    EXPECT_FALSE(part.events()[i].qid);
  }
}

TEST(Partialize, EmptySensorsKeepBoundaries) {
  auto part = partialize(fixtures::complete_log(), SensorSet{});
  std::vector<std::string> ids;
  for (const auto& e : part.events()) ids.push_back(e.id);
  EXPECT_EQ(ids, (std::vector<std::string>{"e0", "e18", "e17", "e19"}));
}

// Every case keeps its first and last event and the observed events keep their order and times.
TEST(Partialize, SimulatedIsPartialLog) {
  auto sc = load_scenario(fixtures::data("scenarios/regular.json"));
  for (auto& a : sc.arrivals) a.count = 10;
  auto log = simulate(terminal(), sc);
  auto part = partialize(log, SensorSet::parse(sensors_of(sc)));
  auto full = correlate(log, EntityType::pid).timed;
  auto kept = correlate(part, EntityType::pid).timed;
  ASSERT_EQ(full.size(), kept.size());
  for (const auto& [pid, idx] : full) {
    const auto& k = kept.at(pid);
    EXPECT_EQ(part.events()[k.front()].id, log.events()[idx.front()].id);
    EXPECT_EQ(part.events()[k.back()].id, log.events()[idx.back()].id);
    std::size_t j = 0;
    for (auto i : k) {
      while (j < idx.size() && log.events()[idx[j]].id != part.events()[i].id) ++j;
      ASSERT_LT(j, idx.size());
      EXPECT_EQ(part.events()[i].time, log.events()[idx[j]].time);
    }
  }
}

TEST(Evaluate, ExactIntervalsGiveZero) {
  auto truth = fixtures::complete_log();
  std::vector<Event> out;
  for (auto e : truth.events()) {
    if (e.act == "m4_s") {
      e.id = "u:" + *e.pid;
      e.tmin = e.time;
      e.tmax = e.time;
    }
    out.push_back(e);
  }
  auto m = evaluate(event_log(out, {EntityType::pid, EntityType::rid, EntityType::qid}), truth, &baggage());
  EXPECT_EQ(m.events.size(), 2u);
  EXPECT_EQ(m.mae, 0);
  EXPECT_EQ(m.containment, 1);
}

TEST(Evaluate, ChainError) {
  auto truth = event_log({ev("a", "1", "a", 0), ev("b", "1", "b", 15000), ev("c", "1", "c", 30000)});
  auto b = ev("u:1:1", "1", "b", std::nullopt);
  b.tmin = 15000;
  b.tmax = 70000;
  auto rep = event_log({ev("a", "1", "a", 0), b, ev("c", "1", "c", 30000)});
  auto m = evaluate(rep, truth);
  ASSERT_EQ(m.events.size(), 1u);
  EXPECT_EQ(m.events[0].error, 55000);
  EXPECT_DOUBLE_EQ(m.events[0].normalized, 55000.0 / 30000.0);
  EXPECT_TRUE(m.events[0].contained);
  EXPECT_LE(m.mae, m.rmse);
}

TEST(Evaluate, NormalizesByModelMinimum) {
  auto truth = fixtures::complete_log();
  std::vector<Event> out;
  for (auto e : truth.events()) {
    if (e.id == "e3") {
      e.id = "u:50:3";
      e.tmin = *e.time - 1000;
      e.tmax = *e.time + 4000;
      e.time.reset();
    }
    out.push_back(e);
  }
  auto m = evaluate(event_log(out, {EntityType::pid, EntityType::rid, EntityType::qid}), truth, &baggage());
  ASSERT_EQ(m.events.size(), 1u);
  EXPECT_EQ(m.events[0].error, 4000);
  EXPECT_DOUBLE_EQ(m.events[0].normalized, 4000.0 / 60000.0);
}

TEST(Evaluate, UnmatchedEventThrows) {
  auto truth = event_log({ev("a", "1", "a", 0)});
  auto rep = event_log({ev("a", "1", "a", 0), ev("b", "1", "b", 1)});
  EXPECT_THROW(evaluate(rep, truth), LogError);
}

TEST(Load, EmptyLogAllZero) {
  auto log = event_log({});
  auto s = load_series(log, parse_segment(log, "m4_s:d1_s"), 60000, 0, 180000);
  ASSERT_EQ(s.size(), 3u);
  for (const auto& p : s) EXPECT_EQ(p.items_per_minute, 0);
}

TEST(Load, TwoCasesInOneWindow) {
  auto log = fixtures::complete_log();
  auto s = load_series(log, parse_segment(log, "m4_c:d1_s"), 60000, at("09:00:00"), at("09:02:00"));
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0].items_per_minute, 1);
  EXPECT_EQ(s[1].items_per_minute, 2);
  auto q = load_series(log, parse_segment(log, "m4:d1"), 60000, at("09:00:30"), at("09:01:30"));
  ASSERT_EQ(q.size(), 1u);
  EXPECT_EQ(q[0].items_per_minute, 2);
  auto half = load_series(log, parse_segment(log, "m4:d1"), 30000, at("09:00:30"), at("09:01:00"));
  EXPECT_EQ(half[0].items_per_minute, 2);
}

TEST(Load, UnknownLabelThrows) {
  EXPECT_THROW(parse_segment(fixtures::complete_log(), "zz:d1_s"), LogError);
  EXPECT_THROW(parse_segment(fixtures::complete_log(), "nocolon"), LogError);
}

TEST(Spectrum, QueueSegmentRows) {
  std::ostringstream out;
  auto log = fixtures::complete_log();
  spectrum_export(out, log, {parse_segment(log, "m4:d1")});
  EXPECT_EQ(out.str(),
            "pid,segment,t_start,t_end\n"
            "50,m4:d1,2020-01-01T09:00:50Z,2020-01-01T09:01:05Z\n"
            "51,m4:d1,2020-01-01T09:01:00Z,2020-01-01T09:01:15Z\n");
}

TEST(Spectrum, EmptyLogHeaderOnly) {
  std::ostringstream out;
  spectrum_export(out, event_log({}), {Segment{"a", "b", std::nullopt}});
  EXPECT_EQ(out.str(), "pid,segment,t_start,t_end\n");
}

TEST(Spectrum, RepairedLogCarriesIntervals) {
  auto r = repair(fixtures::partial_log(), baggage());
  auto iv = apply_solution(r.run, r.constraints, r.solution, ApplyMode::interval);
  std::ostringstream out;
  spectrum_export(out, iv, {parse_segment(iv, "m4:d1")});
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "pid,segment,t_start,t_end,tmin_start,tmax_start,tmin_end,tmax_end");
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 7);
  }
  EXPECT_EQ(n, 2u);
}

// Blockages make the repaired load series worse than regular traffic on the same seeds.
TEST(Load, BlockageErrorExceedsRegular) {
  auto regular = load_scenario(fixtures::data("scenarios/regular.json"));
  auto blocked = load_scenario(fixtures::data("scenarios/blockage.json"));
  auto error = [&](const Scenario& sc, std::uint64_t seed) {
    auto truth = simulate(terminal(), sc, seed);
    auto rep = repair(partialize(truth, SensorSet::parse(sensors_of(sc))), terminal());
    auto iv = apply_solution(rep.run, rep.constraints, rep.solution, ApplyMode::interval);
    auto seg = parse_segment(truth, sc.extra.at("segment").get<std::string>());
    auto [from, to] = time_range(truth, 60000);
    return compare_load(load_series(truth, seg, 60000, from, to), load_series(iv, seg, 60000, from, to)).relative;
  };
  double r = 0, b = 0;
  for (std::uint64_t seed : {1, 2, 3}) {
    r += error(regular, seed);
    b += error(blocked, seed);
  }
  EXPECT_LE(r, b);
}

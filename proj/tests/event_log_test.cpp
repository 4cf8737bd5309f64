#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "pqr/event_log.hpp"

using namespace pqr;
using fixtures::at;

namespace {

std::vector<std::string> ids(const SequentialView& v, EntityType et, const std::string& id) {
  for (const auto& t : v.at(et))
    if (t.id == id) return t.events;
  return {};
}

}  // namespace

TEST(Time, ParsesIsoVariants) {
  EXPECT_EQ(parse_time("1970-01-01T00:00:00Z"), 0);
  EXPECT_EQ(parse_time("1970-01-01 00:00:01"), 1000);
  EXPECT_EQ(parse_time("1970-01-01T00:00:01.5Z"), 1500);
  EXPECT_EQ(parse_time("1970-01-01T01:00:00+01:00"), 0);
  EXPECT_EQ(parse_time("1969-12-31T23:59:59.999Z"), -1);
  EXPECT_EQ(parse_time("2020-01-01T09:00:15Z"), 1577869215000);
  EXPECT_EQ(parse_time("1577869215000"), 1577869215000);
  EXPECT_EQ(parse_time("-20"), -20);
}

TEST(Time, RejectsGarbage) {
  EXPECT_FALSE(parse_time(""));
  EXPECT_FALSE(parse_time("9:00:15"));
  EXPECT_FALSE(parse_time("2020-02-30T00:00:00Z"));
  EXPECT_FALSE(parse_time("2020-01-01T25:00:00Z"));
  EXPECT_FALSE(parse_time("2020-01-01T00:00:00Zjunk"));
}

TEST(Time, FormatRoundTrips) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<Millis> d(-62'000'000'000'000, 253'000'000'000'000);
  for (int i = 0; i < 2000; ++i) {
    Millis t = d(rng);
    EXPECT_EQ(parse_time(format_time(t)), t) << format_time(t);
  }
  EXPECT_EQ(format_time(0), "1970-01-01T00:00:00Z");
  EXPECT_EQ(format_time(1500), "1970-01-01T00:00:01.500Z");
}

TEST(Csv, QuotedFields) {
  std::istringstream in("a,b\n\"x,1\",\"say \"\"hi\"\"\"\r\n\"multi\nline\",2\n");
  auto rows = csv::read(in);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[1].fields, (csv::Row{"x,1", "say \"hi\""}));
  EXPECT_EQ(rows[2].fields, (csv::Row{"multi\nline", "2"}));
  EXPECT_EQ(csv::quote("a\"b"), "\"a\"\"b\"");
}

TEST(Csv, UnterminatedQuoteIsAnError) {
  std::istringstream in("a,b\n\"open,1\n");
  EXPECT_THROW(csv::read(in), ParseError);
}

TEST(ParseLog, CompleteLog) {
  auto log = fixtures::complete_log();
  EXPECT_EQ(log.size(), 16u);
  EXPECT_EQ(log.entity_types(), (std::set<EntityType>{EntityType::pid, EntityType::rid, EntityType::qid}));
  const auto* e0 = log.find("e0");
  ASSERT_NE(e0, nullptr);
  EXPECT_FALSE(e0->rid);
  EXPECT_EQ(e0->qid, "c3:m3");
  EXPECT_EQ(e0->time, at("09:00:15"));
  for (const char* id : {"e0", "e17", "e18", "e19"}) EXPECT_FALSE(log.find(id)->rid) << id;
}

TEST(ParseLog, HeaderOnly) {
  auto log = log_from_string("event_id,pid,activity,time,rid,qid\n");
  EXPECT_TRUE(log.empty());
}

TEST(ParseLog, BottomMeansUndefined) {
  auto log = log_from_string("event_id,pid,activity,time,rid,qid\ne0,50,c3_c,10,⊥,c3:m3\n");
  EXPECT_FALSE(log.events()[0].rid);
}

TEST(ParseLog, ErrorsNameTheRow) {
  auto row_of = [](const std::string& text) -> std::size_t {
    try {
      log_from_string(text);
    } catch (const ParseError& e) {
      return e.row();
    }
    return 0;
  };
  std::string h = "event_id,pid,activity,time\n";
  EXPECT_EQ(row_of(h + "e0,1,a,10\ne0,1,b,20\n"), 3u);
  EXPECT_EQ(row_of(h + "e0,1,a,10\ne1,1,b,noon\n"), 3u);
  EXPECT_EQ(row_of(h + "e0,1,a\n"), 2u);
  EXPECT_THROW(log_from_string("event_id,activity,time\ne0,a,1\n"), ParseError);
}

TEST(ParseLog, ColumnMapping) {
  ColumnMapping m;
  m.pid = "case";
  m.act = "task";
  m.time = "ts";
  auto log = log_from_string("event_id,case,task,ts,colour\ne0,7,a,1,red\n", m);
  EXPECT_EQ(log.events()[0].pid, "7");
  EXPECT_EQ(log.events()[0].act, "a");
  EXPECT_EQ(log.events()[0].extra.at("colour"), "red");
  EXPECT_EQ(log.entity_types(), std::set<EntityType>{EntityType::pid});
}

TEST(Completeness, CompleteLogIsCompleteAndMonotone) {
  auto c = check_completeness(fixtures::complete_log());
  EXPECT_TRUE(c.time_complete);
  EXPECT_TRUE(c.monotone);
  EXPECT_TRUE(c.violations.empty());
}

TEST(Completeness, PartialLogOnPidIsTimeComplete) {
  auto log = fixtures::partial_log();
  EXPECT_EQ(log.entity_types(), std::set<EntityType>{EntityType::pid});
  EXPECT_TRUE(check_completeness(log).time_complete);
}

TEST(Completeness, TieIsReported) {
  auto log = log_from_string("event_id,pid,activity,time\na,1,x,5\nb,1,y,5\nc,2,y,5\n");
  auto c = check_completeness(log);
  EXPECT_FALSE(c.monotone);
  ASSERT_EQ(c.violations.size(), 1u);
  EXPECT_EQ(c.violations[0].first, "a");
  EXPECT_EQ(c.violations[0].second, "b");
  EXPECT_THROW(sequential_view(log), LogError);
  EXPECT_THROW(derive_system_run(log), LogError);
}

TEST(SequentialView, CompleteLogTraces) {
  auto v = sequential_view(fixtures::complete_log());
  EXPECT_EQ(ids(v, EntityType::pid, "50"),
            (std::vector<std::string>{"e0", "e1", "e2", "e3", "e4", "e7", "e8", "e18"}));
  EXPECT_EQ(ids(v, EntityType::rid, "m4"), (std::vector<std::string>{"e3", "e4", "e5", "e6"}));
  EXPECT_EQ(ids(v, EntityType::qid, "m4:d1"), (std::vector<std::string>{"e4", "e6", "e7", "e9"}));
}

TEST(SequentialView, SingleEvent) {
  auto v = sequential_view(log_from_string("event_id,pid,activity,time,rid,qid\na,1,x,5,r,q\n"));
  for (auto et : kEntityTypes) {
    ASSERT_EQ(v.at(et).size(), 1u);
    EXPECT_EQ(v.at(et)[0].events, std::vector<std::string>{"a"});
  }
}

TEST(SystemRun, QueueChain) {
  auto log = fixtures::complete_log();
  auto run = derive_system_run(log);
  auto idx = [&](const char* id) { return *log.index_of(id); };
  auto has = [&](const char* a, const char* b) {
    return std::count(run.edges.begin(), run.edges.end(), RunEdge{idx(a), idx(b), EntityType::qid, "m4:d1"}) == 1;
  };
  EXPECT_TRUE(has("e4", "e6"));
  EXPECT_TRUE(has("e6", "e7"));
  EXPECT_TRUE(has("e7", "e9"));
  EXPECT_TRUE(is_strict_partial_order(run));
}

TEST(SystemRun, PartialLogLeavesUnrelatedEvents) {
  auto log = fixtures::partial_log();
  auto run = derive_system_run(log);
  auto e5 = *log.index_of("e5"), e7 = *log.index_of("e7");
  EXPECT_FALSE(precedes(run, e5, e7));
  EXPECT_FALSE(precedes(run, e7, e5));
}

TEST(SystemRun, SingleTraceIsAChain) {
  auto log = log_from_string("event_id,pid,activity,time\na,1,x,1\nb,1,y,2\nc,1,z,3\nd,1,w,4\n");
  auto run = derive_system_run(log);
  EXPECT_EQ(run.edges.size(), 3u);
  EXPECT_TRUE(precedes(run, 0, 3));
}

TEST(SystemRun, UntimedEventsAreIsolated) {
  auto log = log_from_string("event_id,pid,activity,time\na,1,x,1\nu,1,y,\nc,1,z,3\n");
  auto run = derive_system_run(log);
  ASSERT_EQ(run.edges.size(), 1u);
  EXPECT_EQ(run.edges[0].from, 0u);
  EXPECT_EQ(run.edges[0].to, 2u);
}

TEST(ProjectRun, ResourceD1) {
  auto run = derive_system_run(fixtures::complete_log());
  auto p = project_run(run, EntityType::rid, std::string("d1"));
  std::vector<std::string> got;
  for (const auto& e : p.log.events()) got.push_back(e.id);
  EXPECT_EQ(got, (std::vector<std::string>{"e7", "e8", "e9", "e10"}));
  EXPECT_EQ(p.edges.size(), 3u);
  EXPECT_EQ(ids(traces_from_run(p), EntityType::rid, "d1"), (std::vector<std::string>{"e7", "e8", "e9", "e10"}));
}

TEST(ProjectRun, QueueAndAbsentId) {
  auto run = derive_system_run(fixtures::complete_log());
  auto q = project_run(run, EntityType::qid, std::string("m4:d1"));
  EXPECT_EQ(q.log.size(), 4u);
  EXPECT_EQ(q.edges.size(), 3u);
  auto none = project_run(run, EntityType::rid, std::string("zz"));
  EXPECT_TRUE(none.log.empty());
  EXPECT_TRUE(none.edges.empty());
  EXPECT_THROW(project_run(derive_system_run(fixtures::partial_log()), EntityType::rid), LogError);
}

namespace {

MultiEntityLog random_monotone_log(std::mt19937_64& rng, bool with_extras) {
  std::uniform_int_distribution<int> n_events(0, 25), pick(0, 3), t(0, 40);
  std::bernoulli_distribution coin(0.5);
  std::map<std::string, std::set<Millis>> used;
  std::vector<Event> events;
  int n = n_events(rng);
  for (int i = 0; i < n; ++i) {
    Event e;
    e.id = "e" + std::to_string(i);
    e.act = std::string(1, static_cast<char>('a' + pick(rng)));
    e.pid = std::to_string(pick(rng));
    if (coin(rng)) e.rid = "r" + std::to_string(pick(rng));
    if (coin(rng)) e.qid = "q:" + std::to_string(pick(rng));
    for (int attempt = 0; attempt < 50 && !e.time; ++attempt) {
      Millis cand = t(rng) * 1000 + (coin(rng) ? 250 : 0);
      bool clash = false;
      for (auto et : kEntityTypes)
        if (e.entity(et) && used[std::string(to_string(et)) + *e.entity(et)].count(cand)) clash = true;
      if (!clash) e.time = cand;
    }
    if (!e.time) continue;
    for (auto et : kEntityTypes)
      if (e.entity(et)) used[std::string(to_string(et)) + *e.entity(et)].insert(*e.time);
    if (with_extras && coin(rng)) e.extra["note"] = coin(rng) ? "a,\"b\"" : "plain";
    if (with_extras && coin(rng)) {
      e.tmin = *e.time - 1000;
      e.tmax = *e.time + 2000;
    }
    events.push_back(std::move(e));
  }
  return MultiEntityLog(std::move(events), {EntityType::pid, EntityType::rid, EntityType::qid});
}

}  // namespace

TEST(Properties, RunViewEquivalenceOnRandomLogs) {
  std::mt19937_64 rng(42);
  for (int i = 0; i < 1000; ++i) {
    auto log = random_monotone_log(rng, false);
    ASSERT_TRUE(check_completeness(log).monotone);
    auto run = derive_system_run(log);
    ASSERT_TRUE(is_strict_partial_order(run));
    ASSERT_EQ(traces_from_run(run), sequential_view(log));
  }
}

TEST(Properties, ClosureIsTransitiveAndIrreflexive) {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 100; ++i) {
    auto run = derive_system_run(random_monotone_log(rng, false));
    std::size_t n = run.log.size();
    std::vector<std::vector<bool>> lt(n, std::vector<bool>(n));
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b) lt[a][b] = precedes(run, a, b);
    for (std::size_t a = 0; a < n; ++a) {
      ASSERT_FALSE(lt[a][a]);
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t c = 0; c < n; ++c)
          if (lt[a][b] && lt[b][c]) {
            ASSERT_TRUE(lt[a][c]);
          }
    }
  }
}

TEST(Properties, SerializeParseRoundTrip) {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 300; ++i) {
    auto log = random_monotone_log(rng, true);
    auto text = log_to_string(log);
    auto back = log_from_string(text);
    ASSERT_EQ(back.events(), log.events()) << text;
    ASSERT_EQ(log_to_string(back), text);
  }
  auto t2 = fixtures::complete_log();
  EXPECT_EQ(log_from_string(log_to_string(t2)), t2);
}

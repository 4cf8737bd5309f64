#include <gtest/gtest.h>

#include <random>
#include <sstream>

#include "fixtures.hpp"
#include "pqr/pqr_model.hpp"

using namespace pqr;

namespace {

PQRSystem from_text(const std::string& text) {
  std::istringstream in(text);
  return parse_model(in);
}

const char* kMinimal = R"({
  "process": {
    "transitions": [
      {"id": "in", "label": "in", "kind": "source"},
      {"id": "a_s", "label": "a_s", "kind": "start"},
      {"id": "a_c", "label": "a_c", "kind": "complete"},
      {"id": "out", "label": "out", "kind": "sink"}
    ],
    "places": [
      {"id": "in:a", "kind": "handover"},
      {"id": "a", "kind": "activity"},
      {"id": "a:out", "kind": "handover"}
    ],
    "arcs": [["in", "in:a"], ["in:a", "a_s"], ["a_s", "a"], ["a", "a_c"], ["a_c", "a:out"], ["a:out", "out"]]
  },
  "resources": [{"rid": "a", "tsr_ms": 1000, "twr_ms": 0, "start_labels": ["a_s"], "complete_labels": ["a_c"]}],
  "queues": [
    {"qid": "in:a", "twq_ms": 500, "enqueue_label": "in", "dequeue_label": "a_s"},
    {"qid": "a:out", "twq_ms": 500, "enqueue_label": "a_c", "dequeue_label": "out"}
  ]
})";

std::string replaced(std::string text, const std::string& from, const std::string& to) {
  auto pos = text.find(from);
  EXPECT_NE(pos, std::string::npos) << from;
  return text.replace(pos, from.size(), to);
}

bool has_condition(const std::vector<Diagnostic>& ds, const std::string& cond, const std::string& node) {
  for (const auto& d : ds)
    if (d.condition == cond && d.node == node) return true;
  return false;
}

}  // namespace

TEST(ParseModel, BaggageShape) {
  const auto& s = fixtures::baggage();
  EXPECT_EQ(s.transition_count(), 20u);
  EXPECT_EQ(s.resources().size(), 5u);
  EXPECT_EQ(s.queues().size(), 10u);
  EXPECT_TRUE(s.acyclic());
  EXPECT_TRUE(validate(s).empty());
}

TEST(ParseModel, MinimalModelIsValid) {
  auto s = from_text(kMinimal);
  EXPECT_TRUE(validate(s).empty());
  EXPECT_EQ(s.channel_of(*s.transition_index("a_s")).members.size(), 3u);
}

TEST(ParseModel, QueueWithUnknownDequeueLabel) {
  std::string text = kMinimal;
  text = replaced(text, "\"dequeue_label\": \"out\"", "\"dequeue_label\": \"zz\"");
  EXPECT_THROW(from_text(text), ModelError);
}

TEST(ParseModel, LabelInNoResource) {
  std::string text = kMinimal;
  text = replaced(text, "[\"a_s\"]", "[\"b_s\"]");
  EXPECT_THROW(from_text(text), ModelError);
}

TEST(ParseModel, LabelInTwoResources) {
  std::string text = kMinimal;
  auto pos = text.find("\"resources\": [") + 14;
  text.insert(pos, R"({"rid": "b", "tsr_ms": 1, "twr_ms": 0, "start_labels": ["a_s"], "complete_labels": ["a_c"]}, )");
  EXPECT_THROW(from_text(text), ModelError);
}

TEST(ParseModel, DanglingArcAndSchemaErrors) {
  std::string text = kMinimal;
  text = replaced(text, "[\"a:out\", \"out\"]", "[\"a:out\", \"nowhere\"]");
  EXPECT_THROW(from_text(text), ModelError);
  EXPECT_THROW(from_text("{\"process\": {}}"), ModelError);
  EXPECT_THROW(from_text("not json"), ModelError);
}

TEST(Validate, InitialTokenViolatesCondition8) {
  std::string text = kMinimal;
  text = replaced(text, "{\"id\": \"a\", \"kind\": \"activity\"}", "{\"id\": \"a\", \"kind\": \"activity\", \"initial_tokens\": 1}");
  auto ds = validate(from_text(text));
  EXPECT_TRUE(has_condition(ds, "p-proclet.8", "a"));
}

TEST(Validate, HandoverWithTwoStartsViolatesCondition6) {
  auto s = from_text(R"({
    "process": {
      "transitions": [
        {"id": "in", "label": "in", "kind": "source"},
        {"id": "a_s", "label": "a_s", "kind": "start"},
        {"id": "a_c", "label": "a_c", "kind": "complete"},
        {"id": "b_s", "label": "b_s", "kind": "start"},
        {"id": "b_c", "label": "b_c", "kind": "complete"},
        {"id": "out", "label": "out", "kind": "sink"},
        {"id": "out2", "label": "out2", "kind": "sink"}
      ],
      "places": [
        {"id": "h", "kind": "handover"},
        {"id": "a", "kind": "activity"},
        {"id": "b", "kind": "activity"},
        {"id": "a:out", "kind": "handover"},
        {"id": "b:out", "kind": "handover"}
      ],
      "arcs": [["in", "h"], ["h", "a_s"], ["h", "b_s"], ["a_s", "a"], ["a", "a_c"], ["a_c", "a:out"],
               ["a:out", "out"], ["b_s", "b"], ["b", "b_c"], ["b_c", "b:out"], ["b:out", "out2"]]
    },
    "resources": [
      {"rid": "a", "tsr_ms": 1, "twr_ms": 0, "start_labels": ["a_s"], "complete_labels": ["a_c"]},
      {"rid": "b", "tsr_ms": 1, "twr_ms": 0, "start_labels": ["b_s"], "complete_labels": ["b_c"]}
    ],
    "queues": [
      {"qid": "h", "twq_ms": 0, "enqueue_label": "in", "dequeue_label": "a_s"},
      {"qid": "a:out", "twq_ms": 0, "enqueue_label": "a_c", "dequeue_label": "out"},
      {"qid": "b:out", "twq_ms": 0, "enqueue_label": "b_c", "dequeue_label": "out2"}
    ]
  })");
  auto ds = validate(s);
  EXPECT_TRUE(has_condition(ds, "p-proclet.6", "h"));
  EXPECT_TRUE(has_condition(ds, "pqr.4", "h"));
}

TEST(Validate, SourceWithPrePlaceViolatesCondition2) {
  std::string text = kMinimal;
  text = replaced(text, "\"id\": \"a_s\", \"label\": \"a_s\", \"kind\": \"start\"", "\"id\": \"a_s\", \"label\": \"a_s\", \"kind\": \"source\"");
  auto ds = validate(from_text(text));
  EXPECT_TRUE(has_condition(ds, "p-proclet.2", "a_s"));
}

TEST(Fifo, BaggageExamples) {
  const auto& s = fixtures::baggage();
  EXPECT_TRUE(fifo_relation(s, "m3_s.c3", "d1_s"));
  EXPECT_TRUE(fifo_relation(s, "m3_s.m2", "d1_s"));
  EXPECT_TRUE(fifo_relation(s, "d1_s", "d1_s"));
  EXPECT_FALSE(fifo_relation(s, "c1_c", "c3_c"));
  EXPECT_FALSE(fifo_relation(s, "d1_s", "m3_s.c3"));
  EXPECT_TRUE(fifo_relation(s, "c1_c", "s2_s"));
  EXPECT_THROW(fifo_relation(s, "nope", "d1_s"), ModelError);
}

TEST(Bindings, BaggageExamples) {
  const auto& s = fixtures::baggage();
  auto m4c = bindings_for(s, "m4_c");
  EXPECT_EQ(m4c.rid, "m4");
  EXPECT_EQ(m4c.qid_out, "m4:d1");
  EXPECT_EQ(m4c.role, Role::complete);
  EXPECT_EQ(m4c.tsr, 5000);

  auto c3c = bindings_for(s, "c3_c");
  EXPECT_FALSE(c3c.rid);
  EXPECT_EQ(c3c.tsr, 0);
  EXPECT_EQ(c3c.twr, 0);
  EXPECT_EQ(c3c.role, Role::atomic);
  EXPECT_EQ(c3c.qid_out, "c3:m3");

  auto m3s = bindings_for(s, "m3_s.c3");
  EXPECT_EQ(m3s.rid, "m3");
  EXPECT_EQ(m3s.qid_in, "c3:m3");
  EXPECT_EQ(m3s.twq_in, 15000);
  EXPECT_EQ(m3s.stage, "m3");

  EXPECT_THROW(bindings_for(s, "m3_s"), ModelError);
  EXPECT_THROW(bindings_for(s, "zz"), ModelError);
  EXPECT_EQ(bindings_for(s, "d2_s").rid, "d2");
}

TEST(Channels, PartitionAndLabels) {
  const auto& s = fixtures::baggage();
  std::size_t total = s.transition_count() + 2 * s.queues().size();
  for (std::size_t r = 0; r < s.resources().size(); ++r) total += s.resource_transitions(r).size();
  std::size_t members = 0;
  std::set<std::string> seen;
  for (const auto& c : s.channels()) {
    members += c.members.size();
    for (const auto& m : c.members) {
      EXPECT_TRUE(seen.insert(m.transition).second) << m.transition;
      if (m.kind == ProcletKind::process) {
            EXPECT_EQ(s.transition(*s.transition_index(m.transition)).label, c.label);
          }
    }
  }
  EXPECT_EQ(members, total);
  const auto& ch = s.channel_of(*s.transition_index("m4_c"));
  EXPECT_EQ(ch.members.size(), 3u);
}

TEST(Serialize, RoundTrip) {
  const auto& s = fixtures::baggage();
  auto j = serialize_model(s);
  auto back = model_from_json(nlohmann::json::parse(j.dump()));
  EXPECT_EQ(back.process(), s.process());
  EXPECT_EQ(back.resources(), s.resources());
  EXPECT_EQ(back.queues(), s.queues());
  EXPECT_EQ(serialize_model(back).dump(), j.dump());
}

namespace {

// Random acyclic state machine: transitions in topological order, each with at most one
// pre-place and one post-place.
PQRSystem random_state_machine(std::mt19937_64& rng) {
  std::uniform_int_distribution<int> size(2, 12);
  std::bernoulli_distribution coin(0.45);
  int n = size(rng);
  Skeleton sk;
  for (int i = 0; i < n; ++i) sk.transitions.push_back({"t" + std::to_string(i), "t" + std::to_string(i), TransitionKind::start});
  std::vector<bool> has_pre(n, false);
  for (int i = 0; i < n; ++i) {
    if (!coin(rng) && i + 1 < n) continue;
    std::string p = "p" + std::to_string(i);
    bool used = false;
    for (int j = i + 1; j < n; ++j)
      if (!has_pre[j] && coin(rng)) {
        if (!used) {
          sk.places.push_back({p, PlaceKind::handover, 0});
          sk.arcs.emplace_back("t" + std::to_string(i), p);
          used = true;
        }
        sk.arcs.emplace_back(p, "t" + std::to_string(j));
        has_pre[j] = true;
      }
  }
  return PQRSystem(sk, {}, {});
}

}  // namespace

TEST(Properties, FifoReflexiveAntisymmetric) {
  std::mt19937_64 rng(5);
  for (int k = 0; k < 300; ++k) {
    auto s = random_state_machine(rng);
    ASSERT_TRUE(s.acyclic());
    std::size_t n = s.transition_count();
    for (std::size_t a = 0; a < n; ++a) {
      ASSERT_TRUE(s.fifo(a, a));
      for (std::size_t b = 0; b < n; ++b) {
        if (a != b) {
            ASSERT_FALSE(s.fifo(a, b) && s.fifo(b, a));
          }
        for (std::size_t c = 0; c < n; ++c)
          if (s.fifo(a, b) && s.fifo(b, c)) {
            ASSERT_GE(s.path_count(a, c), 1);
          }
      }
    }
  }
}

TEST(Properties, FifoTransitiveWithoutChoice) {
  std::mt19937_64 rng(6);
  int checked = 0;
  for (int k = 0; k < 300; ++k) {
    auto s = random_state_machine(rng);
    bool choice = false;
    for (std::size_t p = 0; p < s.process().places.size(); ++p) choice |= s.post_transitions(p).size() > 1;
    if (choice) continue;
    ++checked;
    std::size_t n = s.transition_count();
    for (std::size_t a = 0; a < n; ++a)
      for (std::size_t b = 0; b < n; ++b)
        for (std::size_t c = 0; c < n; ++c)
          if (s.fifo(a, b) && s.fifo(b, c)) {
            ASSERT_TRUE(s.fifo(a, c));
          }
  }
  EXPECT_GT(checked, 10);
}

// A divert followed by a merge gives two paths around the middle step, so the relation
// is not transitive in general.
TEST(Fifo, NotTransitiveAcrossDiamond) {
  Skeleton sk;
  sk.transitions = {{"a", "a", TransitionKind::start},
                    {"b", "b", TransitionKind::start},
                    {"x", "x", TransitionKind::start},
                    {"c", "c", TransitionKind::start}};
  sk.places = {{"p", PlaceKind::handover, 0}, {"q", PlaceKind::handover, 0}};
  sk.arcs = {{"a", "p"}, {"p", "b"}, {"p", "x"}, {"b", "q"}, {"x", "q"}, {"q", "c"}};
  PQRSystem s(sk, {}, {});
  EXPECT_TRUE(fifo_relation(s, "a", "b"));
  EXPECT_TRUE(fifo_relation(s, "b", "c"));
  EXPECT_FALSE(fifo_relation(s, "a", "c"));
}

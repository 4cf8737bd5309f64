#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <random>
#include <set>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "pqr/error.hpp"
#include "pqr/event_log.hpp"
#include "pqr/pqr_model.hpp"
#include "pqr/time.hpp"

namespace pqr {

struct FixedCase {
  std::string pid;
  Millis time = 0;
  std::vector<std::string> route;
};

struct ArrivalStream {
  std::string source;
  Millis first = 0;
  Millis interval = 0;
  Millis jitter = 0;
  std::size_t count = 0;  // 0: until the horizon
  std::vector<FixedCase> cases;
};

struct Blockage {
  std::string qid;
  Millis start = 0;  // offset from the scenario start
  Millis duration = 0;
};

// Extra time drawn uniformly from [0, fraction * minimum].
struct Slack {
  double service = 0;
  double resource = 0;
  double queue = 0;
};

struct Scenario {
  std::string model;
  Millis start = 0;
  Millis horizon = 0;
  std::vector<ArrivalStream> arrivals;
  std::map<std::string, std::map<std::string, double>> routing;  // place -> transition -> weight
  Slack slack;
  std::vector<Blockage> blockages;
  std::uint64_t seed = 1;
  nlohmann::json extra;
};

namespace detail {

inline Millis json_time(const nlohmann::json& j, const std::string& what) {
  if (j.is_number_integer()) return j.get<Millis>();
  if (j.is_string())
    if (auto t = parse_time(j.get<std::string>())) return *t;
  throw ModelError("scenario: bad time for " + what);
}

}  // namespace detail

inline Scenario scenario_from_json(const nlohmann::json& j) {
  Scenario s;
  try {
    s.model = j.value("model", "");
    if (j.contains("start")) s.start = detail::json_time(j.at("start"), "start");
    s.horizon = j.at("horizon_ms").get<Millis>();
    s.seed = j.value("seed", std::uint64_t{1});
    auto arrivals = j.value("arrivals", nlohmann::json::array());
    for (const auto& a : arrivals) {
      ArrivalStream stream;
      stream.source = a.at("source").get<std::string>();
      stream.first = a.value("first_ms", Millis{0});
      stream.interval = a.value("interval_ms", Millis{0});
      stream.jitter = a.value("jitter_ms", Millis{0});
      stream.count = a.value("count", std::size_t{0});
      auto cases = a.value("cases", nlohmann::json::array());
      for (const auto& c : cases)
        stream.cases.push_back({c.at("pid").get<std::string>(), detail::json_time(c.at("time"), "case time"),
                              c.value("route", std::vector<std::string>{})});
      s.arrivals.push_back(std::move(stream));
    }
    auto routing = j.value("routing", nlohmann::json::object());
    for (const auto& [place, w] : routing.items())
      for (const auto& [t, weight] : w.items()) s.routing[place][t] = weight.get<double>();
    if (j.contains("slack")) {
      const auto& sl = j.at("slack");
      s.slack = {sl.value("service", 0.0), sl.value("resource", 0.0), sl.value("queue", 0.0)};
    }
    auto blockages = j.value("blockages", nlohmann::json::array());
    for (const auto& b : blockages)
      s.blockages.push_back({b.at("qid").get<std::string>(), b.at("start_ms").get<Millis>(),
                             b.at("duration_ms").get<Millis>()});
    s.extra = j.value("evaluation", nlohmann::json::object());
  } catch (const nlohmann::json::exception& e) {
    throw ModelError(std::string("scenario: ") + e.what());
  }
  if (s.horizon <= 0) throw ModelError("scenario: horizon must be positive");
  for (const auto& [place, w] : s.routing) {
    double total = 0;
    for (const auto& [t, weight] : w) {
      if (weight < 0) throw ModelError("scenario: negative routing weight at " + place);
      total += weight;
    }
    if (total <= 0) throw ModelError("scenario: routing weights at " + place + " sum to zero");
  }
  for (double f : {s.slack.service, s.slack.resource, s.slack.queue})
    if (f < 0) throw ModelError("scenario: negative slack");
  return s;
}

// Relative model paths resolve against the scenario file's directory.
inline Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ModelError(path + ": " + e.what());
  }
  auto s = scenario_from_json(j);
  if (!s.model.empty() && std::filesystem::path(s.model).is_relative())
    s.model = (std::filesystem::path(path).parent_path() / s.model).lexically_normal().string();
  return s;
}

namespace detail {

class Simulator {
 public:
  Simulator(const PQRSystem& s, const Scenario& sc, std::uint64_t seed) : s_(s), sc_(sc), rng_(seed) {
    std::size_t np = s.process().places.size();
    waiting_.resize(np);
    busy_.assign(s.resources().size(), false);
    free_at_.assign(s.resources().size(), std::numeric_limits<Millis>::min());
    for (const auto& b : sc.blockages) {
      if (!s.queue_index(b.qid)) throw ModelError("scenario: blockage on unknown queue " + b.qid);
      blockages_[b.qid].push_back({sc.start + b.start, sc.start + b.start + b.duration});
    }
    for (const auto& [place, w] : sc.routing) {
      if (!s.place_index(place)) throw ModelError("scenario: routing for unknown place " + place);
      for (const auto& [t, weight] : w)
        if (!s.transition_index(t)) throw ModelError("scenario: routing to unknown transition " + t);
    }
  }

  MultiEntityLog run() {
    schedule_arrivals();
    while (!heap_.empty()) {
      Millis now = heap_.top().time;
      while (!heap_.empty() && heap_.top().time == now) {
        auto p = heap_.top();
        heap_.pop();
        handle(p, now);
      }
      dispatch(now);
    }
    for (std::size_t i = 0; i < events_.size(); ++i) events_[i].id = "e" + std::to_string(i + 1);
    return MultiEntityLog(std::move(events_), {EntityType::pid, EntityType::rid, EntityType::qid});
  }

 private:
  enum class Kind { complete = 0, arrival = 1, wake = 2 };
  struct Pending {
    Millis time;
    Kind kind;
    std::size_t case_index;
    std::size_t transition;
    std::uint64_t seq;
    bool operator>(const Pending& o) const {
      return std::tie(time, kind, case_index, transition, seq) >
             std::tie(o.time, o.kind, o.case_index, o.transition, o.seq);
    }
  };
  struct Case {
    std::string pid;
    std::set<std::string> route;
  };
  struct Waiting {
    std::size_t case_index;
    Millis ready;
    std::size_t next;
  };

  void push(Millis t, Kind k, std::size_t c = 0, std::size_t tr = 0) { heap_.push({t, k, c, tr, seq_++}); }

  Millis draw(Millis minimum, double fraction) {
    if (fraction <= 0 || minimum <= 0) return minimum;
    auto hi = static_cast<Millis>(static_cast<double>(minimum) * fraction);
    return minimum + std::uniform_int_distribution<Millis>(0, hi)(rng_);
  }

  void schedule_arrivals() {
    struct A {
      Millis time;
      std::size_t stream;
      std::size_t order;
      std::optional<FixedCase> fixed;
    };
    std::vector<A> all;
    std::set<std::string> taken;
    for (std::size_t i = 0; i < sc_.arrivals.size(); ++i) {
      const auto& a = sc_.arrivals[i];
      auto t = s_.transition_index(a.source);
      if (!t || !s_.pre_places(*t).empty()) throw ModelError("scenario: " + a.source + " is not a source transition");
      for (const auto& c : a.cases) {
        all.push_back({c.time, i, all.size(), c});
        taken.insert(c.pid);
      }
      if (a.interval <= 0) continue;
      for (std::size_t k = 0; a.count == 0 || k < a.count; ++k) {
        Millis t0 = sc_.start + a.first + static_cast<Millis>(k) * a.interval;
        if (t0 >= sc_.start + sc_.horizon) break;
        Millis j = a.jitter > 0 ? std::uniform_int_distribution<Millis>(0, a.jitter)(rng_) : 0;
        all.push_back({t0 + j, i, all.size(), std::nullopt});
      }
    }
    std::stable_sort(all.begin(), all.end(), [](const A& x, const A& y) { return x.time < y.time; });
    std::size_t counter = 0;
    for (const auto& a : all) {
      Case c;
      if (a.fixed) {
        c.pid = a.fixed->pid;
        c.route.insert(a.fixed->route.begin(), a.fixed->route.end());
      } else {
        do c.pid = std::to_string(++counter);
        while (taken.count(c.pid));
      }
      cases_.push_back(std::move(c));
      push(a.time, Kind::arrival, cases_.size() - 1, s_.require_transition(sc_.arrivals[a.stream].source));
    }
  }

  std::size_t choose(std::size_t c, std::size_t place) {
    const auto& opts = s_.post_transitions(place);
    if (opts.empty()) throw ModelError("place " + s_.place(place).id + " has no outgoing transition");
    if (opts.size() == 1) return opts.front();
    for (auto t : opts)
      if (cases_[c].route.count(s_.transition(t).id)) return t;
    std::vector<double> w(opts.size(), 1.0);
    if (auto it = sc_.routing.find(s_.place(place).id); it != sc_.routing.end())
      for (std::size_t i = 0; i < opts.size(); ++i) {
        auto jt = it->second.find(s_.transition(opts[i]).id);
        w[i] = jt == it->second.end() ? 0.0 : jt->second;
      }
    std::discrete_distribution<std::size_t> pick(w.begin(), w.end());
    return opts[pick(rng_)];
  }

  void record(std::size_t c, std::size_t t, Millis now) {
    auto b = s_.binding(t);
    Event e;
    e.act = b.label;
    e.time = now;
    e.pid = cases_[c].pid;
    e.rid = b.rid;
    e.qid = (b.kind == TransitionKind::start || b.kind == TransitionKind::sink) ? b.qid_in : b.qid_out;
    events_.push_back(std::move(e));
  }

  void enter_handover(std::size_t c, std::size_t t, Millis now) {
    auto place = s_.post_places(t).front();
    auto b = s_.binding(t);
    Millis ready = now + draw(b.twq_out, sc_.slack.queue);
    waiting_[place].push_back({c, ready, choose(c, place)});
    push(ready, Kind::wake);
  }

  void handle(const Pending& p, Millis now) {
    switch (p.kind) {
      case Kind::arrival:
        record(p.case_index, p.transition, now);
        enter_handover(p.case_index, p.transition, now);
        break;
      case Kind::complete: {
        record(p.case_index, p.transition, now);
        auto r = *s_.resource_index(*s_.binding(p.transition).rid);
        busy_[r] = false;
        free_at_[r] = now + draw(s_.resources()[r].twr, sc_.slack.resource);
        push(free_at_[r], Kind::wake);
        enter_handover(p.case_index, p.transition, now);
        break;
      }
      case Kind::wake:
        break;
    }
  }

  std::optional<Millis> blocked_until(std::size_t place, Millis now) const {
    auto q = s_.queue_of_place(place);
    if (!q) return std::nullopt;
    auto it = blockages_.find(s_.queues()[*q].qid);
    if (it == blockages_.end()) return std::nullopt;
    for (const auto& [from, to] : it->second)
      if (now >= from && now < to) return to;
    return std::nullopt;
  }

  void dispatch(Millis now) {
    for (bool changed = true; changed;) {
      changed = false;
      std::map<std::size_t, std::size_t> best;  // resource -> place
      for (std::size_t p = 0; p < waiting_.size(); ++p) {
        if (waiting_[p].empty()) continue;
        const auto& head = waiting_[p].front();
        if (head.ready > now) continue;
        if (auto until = blocked_until(p, now)) {
          push(*until, Kind::wake);
          continue;
        }
        auto b = s_.binding(head.next);
        if (b.kind == TransitionKind::sink) {
          record(head.case_index, head.next, now);
          waiting_[p].pop_front();
          changed = true;
          continue;
        }
        auto r = *s_.resource_index(*b.rid);
        if (busy_[r] || free_at_[r] > now) continue;
        auto it = best.find(r);
        if (it == best.end() || waiting_[it->second].front().ready > head.ready) best[r] = p;
      }
      for (auto [r, p] : best) {
        auto head = waiting_[p].front();
        waiting_[p].pop_front();
        record(head.case_index, head.next, now);
        busy_[r] = true;
        auto activity = s_.post_places(head.next).front();
        auto done = choose(head.case_index, activity);
        push(now + draw(s_.resources()[r].tsr, sc_.slack.service), Kind::complete, head.case_index, done);
        changed = true;
      }
    }
  }

  const PQRSystem& s_;
  const Scenario& sc_;
  std::mt19937_64 rng_;
  std::vector<Case> cases_;
  std::vector<std::deque<Waiting>> waiting_;
  std::vector<bool> busy_;
  std::vector<Millis> free_at_;
  std::map<std::string, std::vector<std::pair<Millis, Millis>>> blockages_;
  std::priority_queue<Pending, std::vector<Pending>, std::greater<>> heap_;
  std::vector<Event> events_;
  std::uint64_t seq_ = 0;
};

}  // namespace detail

// Ground-truth complete log. Deterministic for a given seed.
inline MultiEntityLog simulate(const PQRSystem& system, const Scenario& scenario, std::uint64_t seed) {
  if (!system.acyclic()) throw ModelError("process proclet is cyclic");
  return detail::Simulator(system, scenario, seed).run();
}

inline MultiEntityLog simulate(const PQRSystem& system, const Scenario& scenario) {
  return simulate(system, scenario, scenario.seed);
}

// A sensor is an activity label, or "label@pid" to observe one case only.
struct SensorSet {
  std::set<std::string> labels;
  std::set<std::pair<std::string, std::string>> qualified;

  static SensorSet parse(const std::vector<std::string>& items) {
    SensorSet s;
    for (const auto& item : items) {
      if (item.empty()) continue;
      auto at = item.rfind('@');
      if (at == std::string::npos) s.labels.insert(item);
      else s.qualified.insert({item.substr(0, at), item.substr(at + 1)});
    }
    return s;
  }

  bool observes(const Event& e) const {
    return labels.count(e.act) || (e.pid && qualified.count({e.act, *e.pid}));
  }
};

inline MultiEntityLog partialize(const MultiEntityLog& log, const SensorSet& sensors, bool keep_boundaries = true) {
  if (!log.entity_types().count(EntityType::pid)) throw LogError("log has no pid column");
  std::set<std::size_t> keep;
  auto corr = correlate(log, EntityType::pid);
  if (!corr.untimed.empty()) throw LogError("partialize needs a time-complete log");
  const auto& ev = log.events();
  for (std::size_t i = 0; i < ev.size(); ++i) {
    if (!ev[i].pid) throw LogError("event " + ev[i].id + " has no pid");
    if (sensors.observes(ev[i])) keep.insert(i);
  }
  if (keep_boundaries)
    for (const auto& [pid, idx] : corr.timed) {
      keep.insert(idx.front());
      keep.insert(idx.back());
    }
  std::vector<Event> out;
  for (auto i : keep) {
    Event e;
    e.id = ev[i].id;
    e.act = ev[i].act;
    e.time = ev[i].time;
    e.pid = ev[i].pid;
    e.extra = ev[i].extra;
    out.push_back(std::move(e));
  }
  return MultiEntityLog(std::move(out), {EntityType::pid});
}

}  // namespace pqr

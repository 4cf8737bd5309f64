#pragma once

#include <algorithm>
#include <functional>
#include <istream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pqr/error.hpp"
#include "pqr/event_log.hpp"
#include "pqr/time.hpp"

namespace pqr {

enum class TransitionKind { start, complete, source, sink };
enum class PlaceKind { activity, handover };

inline std::string_view to_string(TransitionKind k) {
  switch (k) {
    case TransitionKind::start: return "start";
    case TransitionKind::complete: return "complete";
    case TransitionKind::source: return "source";
    case TransitionKind::sink: return "sink";
  }
  return "?";
}

inline std::string_view to_string(PlaceKind k) { return k == PlaceKind::activity ? "activity" : "handover"; }

struct Transition {
  std::string id;
  std::string label;
  TransitionKind kind = TransitionKind::start;

  bool operator==(const Transition&) const = default;
};

struct Place {
  std::string id;
  PlaceKind kind = PlaceKind::handover;
  int initial_tokens = 0;

  bool operator==(const Place&) const = default;
};

struct Skeleton {
  std::vector<Place> places;
  std::vector<Transition> transitions;
  std::vector<std::pair<std::string, std::string>> arcs;

  bool operator==(const Skeleton&) const = default;
};

struct Resource {
  std::string rid;
  Millis tsr = 0;
  Millis twr = 0;
  std::vector<std::string> start_labels;
  std::vector<std::string> complete_labels;

  bool operator==(const Resource&) const = default;
};

struct Queue {
  std::string qid;
  Millis twq = 0;
  std::string enqueue_label;
  std::string dequeue_label;

  bool operator==(const Queue&) const = default;
};

enum class ProcletKind { process, resource, queue };

inline std::string_view to_string(ProcletKind k) {
  switch (k) {
    case ProcletKind::process: return "process";
    case ProcletKind::resource: return "resource";
    case ProcletKind::queue: return "queue";
  }
  return "?";
}

// Transition ids across proclets: process transitions keep their id, resource transitions
// mirror one process transition as "<rid>/<tid>", queue transitions are "<qid>/enqueue" and
// "<qid>/dequeue".
inline std::string resource_transition_id(const std::string& rid, const std::string& tid) { return rid + "/" + tid; }
inline std::string enqueue_id(const std::string& qid) { return qid + "/enqueue"; }
inline std::string dequeue_id(const std::string& qid) { return qid + "/dequeue"; }

struct ChannelMember {
  ProcletKind kind;
  std::string proclet;  // "process", a rid or a qid
  std::string transition;

  bool operator==(const ChannelMember&) const = default;
  auto operator<=>(const ChannelMember&) const = default;
};

struct Channel {
  std::string label;
  std::vector<ChannelMember> members;
};

struct Diagnostic {
  std::string condition;  // e.g. "p-proclet.6", "pqr.3"
  std::string node;
  std::string message;
};

enum class Role { start, complete, atomic };

inline std::string_view to_string(Role r) {
  switch (r) {
    case Role::start: return "start";
    case Role::complete: return "complete";
    case Role::atomic: return "atomic";
  }
  return "?";
}

// Static resource and queue context of one process transition. Unlinked resources and
// queues are left empty with zero durations.
struct StepBinding {
  std::string transition;
  std::string label;
  TransitionKind kind = TransitionKind::start;
  Role role = Role::start;
  std::optional<std::string> rid;
  Millis tsr = 0;
  Millis twr = 0;
  std::optional<std::string> qid_in;
  Millis twq_in = 0;
  std::optional<std::string> qid_out;
  Millis twq_out = 0;
  // Activity place for start/complete transitions, the transition itself for atomic ones.
  std::string stage;
};

class PQRSystem {
 public:
  PQRSystem() = default;

  PQRSystem(Skeleton process, std::vector<Resource> resources, std::vector<Queue> queues)
      : process_(std::move(process)), resources_(std::move(resources)), queues_(std::move(queues)) {
    index_nodes();
    link();
    build_channels();
    compute_paths();
  }

  const Skeleton& process() const { return process_; }
  const std::vector<Resource>& resources() const { return resources_; }
  const std::vector<Queue>& queues() const { return queues_; }
  const std::vector<Channel>& channels() const { return channels_; }

  std::size_t transition_count() const { return process_.transitions.size(); }
  const Transition& transition(std::size_t t) const { return process_.transitions[t]; }
  const Place& place(std::size_t p) const { return process_.places[p]; }

  std::optional<std::size_t> transition_index(std::string_view id) const {
    auto it = transition_index_.find(std::string(id));
    if (it == transition_index_.end()) return std::nullopt;
    return it->second;
  }
  std::size_t require_transition(std::string_view id) const {
    auto t = transition_index(id);
    if (!t) throw ModelError("unknown process transition " + std::string(id));
    return *t;
  }
  std::optional<std::size_t> place_index(std::string_view id) const {
    auto it = place_index_.find(std::string(id));
    if (it == place_index_.end()) return std::nullopt;
    return it->second;
  }

  const std::vector<std::size_t>& pre_places(std::size_t t) const { return t_pre_[t]; }
  const std::vector<std::size_t>& post_places(std::size_t t) const { return t_post_[t]; }
  const std::vector<std::size_t>& pre_transitions(std::size_t p) const { return p_pre_[p]; }
  const std::vector<std::size_t>& post_transitions(std::size_t p) const { return p_post_[p]; }

  // Directly following transitions through the single post place.
  std::vector<std::size_t> successors(std::size_t t) const {
    std::vector<std::size_t> out;
    for (auto p : t_post_[t])
      for (auto t2 : p_post_[p]) out.push_back(t2);
    return out;
  }

  std::vector<std::size_t> transitions_with_label(std::string_view label) const {
    std::vector<std::size_t> out;
    for (std::size_t t = 0; t < process_.transitions.size(); ++t)
      if (process_.transitions[t].label == label) out.push_back(t);
    return out;
  }
  bool has_label(std::string_view label) const { return !transitions_with_label(label).empty(); }

  std::optional<std::size_t> resource_of_place(std::size_t p) const { return place_resource_[p]; }
  std::optional<std::size_t> queue_of_place(std::size_t p) const { return place_queue_[p]; }
  std::optional<std::size_t> resource_index(std::string_view rid) const {
    for (std::size_t i = 0; i < resources_.size(); ++i)
      if (resources_[i].rid == rid) return i;
    return std::nullopt;
  }
  std::optional<std::size_t> queue_index(std::string_view qid) const {
    for (std::size_t i = 0; i < queues_.size(); ++i)
      if (queues_[i].qid == qid) return i;
    return std::nullopt;
  }

  // Process transitions mirrored by a resource proclet.
  const std::vector<std::size_t>& resource_transitions(std::size_t r) const { return resource_transitions_[r]; }
  // Process transition feeding (enqueue) and draining (dequeue) a queue.
  std::optional<std::size_t> queue_enqueuer(std::size_t q) const { return queue_enq_[q]; }
  std::optional<std::size_t> queue_dequeuer(std::size_t q) const { return queue_deq_[q]; }

  const Channel& channel_of(std::size_t t) const { return channels_[t]; }

  bool acyclic() const { return acyclic_; }

  // Number of directed paths from t1 to tn, saturated at 2.
  int path_count(std::size_t t1, std::size_t tn) const { return paths_[t1][tn]; }
  bool fifo(std::size_t t1, std::size_t tn) const { return paths_[t1][tn] == 1; }

  StepBinding binding(std::size_t t) const {
    const auto& tr = process_.transitions[t];
    StepBinding b;
    b.transition = tr.id;
    b.label = tr.label;
    b.kind = tr.kind;
    b.role = tr.kind == TransitionKind::start      ? Role::start
             : tr.kind == TransitionKind::complete ? Role::complete
                                                   : Role::atomic;
    b.stage = tr.id;
    std::optional<std::size_t> activity;
    for (auto p : t_pre_[t]) {
      if (process_.places[p].kind == PlaceKind::activity) activity = p;
      if (auto q = place_queue_[p]) {
        b.qid_in = queues_[*q].qid;
        b.twq_in = queues_[*q].twq;
      }
    }
    for (auto p : t_post_[t]) {
      if (process_.places[p].kind == PlaceKind::activity) activity = p;
      if (auto q = place_queue_[p]) {
        b.qid_out = queues_[*q].qid;
        b.twq_out = queues_[*q].twq;
      }
    }
    if (activity && b.role != Role::atomic) {
      b.stage = process_.places[*activity].id;
      if (auto r = place_resource_[*activity]) {
        b.rid = resources_[*r].rid;
        b.tsr = resources_[*r].tsr;
        b.twr = resources_[*r].twr;
      }
    }
    return b;
  }

 private:
  void index_nodes() {
    for (std::size_t i = 0; i < process_.places.size(); ++i)
      if (!place_index_.emplace(process_.places[i].id, i).second)
        throw ModelError("duplicate place id " + process_.places[i].id);
    for (std::size_t i = 0; i < process_.transitions.size(); ++i) {
      const auto& id = process_.transitions[i].id;
      if (place_index_.count(id)) throw ModelError("id " + id + " used for a place and a transition");
      if (!transition_index_.emplace(id, i).second) throw ModelError("duplicate transition id " + id);
      if (process_.transitions[i].label.empty()) throw ModelError("transition " + id + " has no label");
    }
    t_pre_.assign(process_.transitions.size(), {});
    t_post_.assign(process_.transitions.size(), {});
    p_pre_.assign(process_.places.size(), {});
    p_post_.assign(process_.places.size(), {});
    std::set<std::pair<std::string, std::string>> seen;
    for (const auto& [from, to] : process_.arcs) {
      if (!seen.insert({from, to}).second) throw ModelError("duplicate arc " + from + " -> " + to);
      auto fp = place_index_.find(from), ft = transition_index_.find(from);
      auto tp = place_index_.find(to), tt = transition_index_.find(to);
      if (fp == place_index_.end() && ft == transition_index_.end())
        throw ModelError("arc references unknown node " + from);
      if (tp == place_index_.end() && tt == transition_index_.end())
        throw ModelError("arc references unknown node " + to);
      if (fp != place_index_.end() && tt != transition_index_.end()) {
        p_post_[fp->second].push_back(tt->second);
        t_pre_[tt->second].push_back(fp->second);
      } else if (ft != transition_index_.end() && tp != place_index_.end()) {
        t_post_[ft->second].push_back(tp->second);
        p_pre_[tp->second].push_back(ft->second);
      } else {
        throw ModelError("arc " + from + " -> " + to + " must connect a place and a transition");
      }
    }
  }

  void link() {
    std::set<std::string> rids, qids;
    for (const auto& r : resources_) {
      if (r.rid.empty() || !rids.insert(r.rid).second) throw ModelError("missing or duplicate rid '" + r.rid + "'");
      if (r.tsr < 0 || r.twr < 0) throw ModelError("resource " + r.rid + " has a negative duration");
    }
    for (const auto& q : queues_) {
      if (q.qid.empty() || !qids.insert(q.qid).second) throw ModelError("missing or duplicate qid '" + q.qid + "'");
      if (q.twq < 0) throw ModelError("queue " + q.qid + " has a negative duration");
    }

    place_resource_.assign(process_.places.size(), std::nullopt);
    place_queue_.assign(process_.places.size(), std::nullopt);
    resource_transitions_.assign(resources_.size(), {});
    queue_enq_.assign(queues_.size(), std::nullopt);
    queue_deq_.assign(queues_.size(), std::nullopt);

    auto owners = [&](const std::string& label, bool start) {
      std::vector<std::size_t> out;
      for (std::size_t r = 0; r < resources_.size(); ++r) {
        const auto& labels = start ? resources_[r].start_labels : resources_[r].complete_labels;
        if (std::find(labels.begin(), labels.end(), label) != labels.end()) out.push_back(r);
      }
      return out;
    };

    std::vector<std::set<std::string>> used_start(resources_.size()), used_complete(resources_.size());
    for (std::size_t p = 0; p < process_.places.size(); ++p) {
      if (process_.places[p].kind != PlaceKind::activity) continue;
      std::optional<std::size_t> linked;
      auto visit = [&](std::size_t t, bool start) {
        const auto& label = process_.transitions[t].label;
        auto o = owners(label, start);
        if (o.empty())
          throw ModelError("label " + label + " of activity " + process_.places[p].id + " is in no resource");
        if (o.size() > 1)
          throw ModelError("label " + label + " of activity " + process_.places[p].id + " is in several resources");
        if (linked && *linked != o.front())
          throw ModelError("activity " + process_.places[p].id + " maps to several resources");
        linked = o.front();
        (start ? used_start : used_complete)[o.front()].insert(label);
      };
      for (auto t : p_pre_[p]) visit(t, true);
      for (auto t : p_post_[p]) visit(t, false);
      if (!linked) continue;
      for (std::size_t q = 0; q < process_.places.size(); ++q)
        if (q != p && place_resource_[q] == linked)
          throw ModelError("resource " + resources_[*linked].rid + " serves activities " + process_.places[q].id +
                           " and " + process_.places[p].id);
      place_resource_[p] = linked;
      for (auto t : p_pre_[p]) resource_transitions_[*linked].push_back(t);
      for (auto t : p_post_[p]) resource_transitions_[*linked].push_back(t);
    }
    for (std::size_t r = 0; r < resources_.size(); ++r) {
      for (const auto& l : resources_[r].start_labels)
        if (!used_start[r].count(l))
          throw ModelError("resource " + resources_[r].rid + " start label " + l + " matches no activity");
      for (const auto& l : resources_[r].complete_labels)
        if (!used_complete[r].count(l))
          throw ModelError("resource " + resources_[r].rid + " complete label " + l + " matches no activity");
    }

    for (std::size_t q = 0; q < queues_.size(); ++q) {
      const auto& queue = queues_[q];
      std::vector<std::size_t> matches;
      for (std::size_t p = 0; p < process_.places.size(); ++p) {
        if (process_.places[p].kind != PlaceKind::handover) continue;
        bool enq = std::any_of(p_pre_[p].begin(), p_pre_[p].end(),
                               [&](auto t) { return process_.transitions[t].label == queue.enqueue_label; });
        bool deq = std::any_of(p_post_[p].begin(), p_post_[p].end(),
                               [&](auto t) { return process_.transitions[t].label == queue.dequeue_label; });
        if (enq && deq) matches.push_back(p);
      }
      if (matches.empty())
        throw ModelError("queue " + queue.qid + " (" + queue.enqueue_label + " -> " + queue.dequeue_label +
                         ") matches no handover place");
      if (matches.size() > 1) throw ModelError("queue " + queue.qid + " matches several handover places");
      auto p = matches.front();
      if (place_queue_[p])
        throw ModelError("handover " + process_.places[p].id + " matches queues " + queues_[*place_queue_[p]].qid +
                         " and " + queue.qid);
      place_queue_[p] = q;
      for (auto t : p_pre_[p])
        if (process_.transitions[t].label == queue.enqueue_label) queue_enq_[q] = t;
      for (auto t : p_post_[p])
        if (process_.transitions[t].label == queue.dequeue_label) queue_deq_[q] = t;
    }
  }

  void build_channels() {
    channels_.clear();
    for (std::size_t t = 0; t < process_.transitions.size(); ++t) {
      Channel c{process_.transitions[t].label, {{ProcletKind::process, "process", process_.transitions[t].id}}};
      for (std::size_t r = 0; r < resources_.size(); ++r)
        for (auto rt : resource_transitions_[r])
          if (rt == t)
            c.members.push_back({ProcletKind::resource, resources_[r].rid,
                                 resource_transition_id(resources_[r].rid, process_.transitions[t].id)});
      for (std::size_t q = 0; q < queues_.size(); ++q) {
        if (queue_enq_[q] == t) c.members.push_back({ProcletKind::queue, queues_[q].qid, enqueue_id(queues_[q].qid)});
        if (queue_deq_[q] == t) c.members.push_back({ProcletKind::queue, queues_[q].qid, dequeue_id(queues_[q].qid)});
      }
      channels_.push_back(std::move(c));
    }
  }

  void compute_paths() {
    std::size_t n = process_.transitions.size();
    paths_.assign(n, std::vector<int>(n, 0));
    std::vector<std::vector<std::size_t>> succ(n);
    for (std::size_t t = 0; t < n; ++t) succ[t] = successors(t);

    std::vector<std::pair<std::size_t, std::size_t>> edges;
    for (std::size_t t = 0; t < n; ++t)
      for (auto s : succ[t]) edges.emplace_back(t, s);
    acyclic_ = is_acyclic(n, edges);

    if (acyclic_) {
      for (std::size_t src = 0; src < n; ++src) {
        std::vector<int> memo(n, -1);
        std::function<int(std::size_t)> count = [&](std::size_t v) -> int {
          if (memo[v] >= 0) return memo[v];
          int c = 0;
          for (auto w : succ[v]) c = std::min(2, c + count(w));
          return memo[v] = c;
        };
        // Paths from src to every target: count paths into targets by reverse direction.
        for (std::size_t dst = 0; dst < n; ++dst) {
          std::fill(memo.begin(), memo.end(), -1);
          memo[dst] = 1;
          paths_[src][dst] = src == dst ? 1 : count(src);
        }
      }
      return;
    }
    // Cyclic skeleton: enumerate simple paths, stopping at two.
    for (std::size_t src = 0; src < n; ++src)
      for (std::size_t dst = 0; dst < n; ++dst) {
        if (src == dst) {
          paths_[src][dst] = 1;
          continue;
        }
        int found = 0;
        std::vector<bool> on_path(n, false);
        std::function<void(std::size_t)> dfs = [&](std::size_t v) {
          if (found >= 2) return;
          if (v == dst) {
            ++found;
            return;
          }
          on_path[v] = true;
          for (auto w : succ[v])
            if (!on_path[w]) dfs(w);
          on_path[v] = false;
        };
        dfs(src);
        paths_[src][dst] = found;
      }
  }

  Skeleton process_;
  std::vector<Resource> resources_;
  std::vector<Queue> queues_;
  std::vector<Channel> channels_;
  std::unordered_map<std::string, std::size_t> place_index_, transition_index_;
  std::vector<std::vector<std::size_t>> t_pre_, t_post_, p_pre_, p_post_;
  std::vector<std::optional<std::size_t>> place_resource_, place_queue_;
  std::vector<std::vector<std::size_t>> resource_transitions_;
  std::vector<std::optional<std::size_t>> queue_enq_, queue_deq_;
  std::vector<std::vector<int>> paths_;
  bool acyclic_ = true;
};

namespace detail {

template <class T>
T field(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.is_object() || !j.contains(key)) throw ModelError(where + ": missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ModelError(where + ": field '" + key + "' has the wrong type");
  }
}

inline TransitionKind transition_kind(const std::string& s, const std::string& where) {
  for (auto k : {TransitionKind::start, TransitionKind::complete, TransitionKind::source, TransitionKind::sink})
    if (to_string(k) == s) return k;
  throw ModelError(where + ": unknown transition kind '" + s + "'");
}

inline PlaceKind place_kind(const std::string& s, const std::string& where) {
  if (s == "activity") return PlaceKind::activity;
  if (s == "handover") return PlaceKind::handover;
  throw ModelError(where + ": unknown place kind '" + s + "'");
}

}  // namespace detail

inline PQRSystem model_from_json(const nlohmann::json& j) {
  using detail::field;
  if (!j.is_object()) throw ModelError("model must be a JSON object");
  Skeleton sk;
  auto process = field<nlohmann::json>(j, "process", "model");
  for (const auto& t : field<nlohmann::json>(process, "transitions", "process")) {
    auto id = field<std::string>(t, "id", "transition");
    sk.transitions.push_back({id, field<std::string>(t, "label", "transition " + id),
                              detail::transition_kind(field<std::string>(t, "kind", "transition " + id), id)});
  }
  for (const auto& p : field<nlohmann::json>(process, "places", "process")) {
    auto id = field<std::string>(p, "id", "place");
    Place pl{id, detail::place_kind(field<std::string>(p, "kind", "place " + id), id), 0};
    if (p.contains("initial_tokens")) pl.initial_tokens = field<int>(p, "initial_tokens", "place " + id);
    sk.places.push_back(pl);
  }
  for (const auto& a : field<nlohmann::json>(process, "arcs", "process")) {
    if (!a.is_array() || a.size() != 2 || !a[0].is_string() || !a[1].is_string())
      throw ModelError("arc must be a pair of node ids");
    sk.arcs.emplace_back(a[0].get<std::string>(), a[1].get<std::string>());
  }
  std::vector<Resource> resources;
  if (j.contains("resources"))
    for (const auto& r : j.at("resources")) {
      auto rid = field<std::string>(r, "rid", "resource");
      std::string w = "resource " + rid;
      resources.push_back({rid, field<Millis>(r, "tsr_ms", w), field<Millis>(r, "twr_ms", w),
                           field<std::vector<std::string>>(r, "start_labels", w),
                           field<std::vector<std::string>>(r, "complete_labels", w)});
    }
  std::vector<Queue> queues;
  if (j.contains("queues"))
    for (const auto& q : j.at("queues")) {
      auto qid = field<std::string>(q, "qid", "queue");
      std::string w = "queue " + qid;
      queues.push_back({qid, field<Millis>(q, "twq_ms", w), field<std::string>(q, "enqueue_label", w),
                        field<std::string>(q, "dequeue_label", w)});
    }
  return PQRSystem(std::move(sk), std::move(resources), std::move(queues));
}

inline PQRSystem parse_model(std::istream& in) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ModelError(std::string("model is not valid JSON: ") + e.what());
  }
  return model_from_json(j);
}

inline nlohmann::ordered_json serialize_model(const PQRSystem& s) {
  nlohmann::ordered_json j;
  auto& process = j["process"];
  process["transitions"] = nlohmann::ordered_json::array();
  for (const auto& t : s.process().transitions)
    process["transitions"].push_back({{"id", t.id}, {"label", t.label}, {"kind", to_string(t.kind)}});
  process["places"] = nlohmann::ordered_json::array();
  for (const auto& p : s.process().places) {
    nlohmann::ordered_json pj{{"id", p.id}, {"kind", to_string(p.kind)}};
    if (p.initial_tokens) pj["initial_tokens"] = p.initial_tokens;
    process["places"].push_back(pj);
  }
  process["arcs"] = nlohmann::ordered_json::array();
  for (const auto& [a, b] : s.process().arcs) process["arcs"].push_back({a, b});
  j["resources"] = nlohmann::ordered_json::array();
  for (const auto& r : s.resources())
    j["resources"].push_back({{"rid", r.rid},
                              {"tsr_ms", r.tsr},
                              {"twr_ms", r.twr},
                              {"start_labels", r.start_labels},
                              {"complete_labels", r.complete_labels}});
  j["queues"] = nlohmann::ordered_json::array();
  for (const auto& q : s.queues())
    j["queues"].push_back(
        {{"qid", q.qid}, {"twq_ms", q.twq}, {"enqueue_label", q.enqueue_label}, {"dequeue_label", q.dequeue_label}});
  return j;
}

// Checks the process, resource and queue proclet conditions and the composition conditions.
inline std::vector<Diagnostic> validate(const PQRSystem& s) {
  std::vector<Diagnostic> out;
  auto add = [&](std::string cond, std::string node, std::string msg) {
    out.push_back({std::move(cond), std::move(node), std::move(msg)});
  };
  const auto& sk = s.process();

  for (std::size_t t = 0; t < sk.transitions.size(); ++t) {
    const auto& tr = sk.transitions[t];
    if (s.pre_places(t).size() > 1) add("p-proclet.3", tr.id, "more than one pre-place");
    if (s.post_places(t).size() > 1) add("p-proclet.3", tr.id, "more than one post-place");
    bool no_pre = s.pre_places(t).empty(), no_post = s.post_places(t).empty();
    if (tr.kind == TransitionKind::source && !no_pre) add("p-proclet.2", tr.id, "source transition has a pre-place");
    if (tr.kind == TransitionKind::sink && !no_post) add("p-proclet.2", tr.id, "sink transition has a post-place");
    if (no_pre && tr.kind != TransitionKind::source) add("p-proclet.2", tr.id, "transition without pre-place must be a source");
    if (no_post && tr.kind != TransitionKind::sink) add("p-proclet.2", tr.id, "transition without post-place must be a sink");
    if (no_pre && no_post) add("p-proclet.3", tr.id, "isolated transition");
  }
  // Connectivity over the undirected skeleton.
  std::size_t n = sk.places.size() + sk.transitions.size();
  if (n) {
    std::vector<std::vector<std::size_t>> adj(n);
    for (std::size_t t = 0; t < sk.transitions.size(); ++t) {
      for (auto p : s.pre_places(t)) {
        adj[sk.places.size() + t].push_back(p);
        adj[p].push_back(sk.places.size() + t);
      }
      for (auto p : s.post_places(t)) {
        adj[sk.places.size() + t].push_back(p);
        adj[p].push_back(sk.places.size() + t);
      }
    }
    std::vector<bool> seen(n, false);
    std::vector<std::size_t> stack{0};
    seen[0] = true;
    while (!stack.empty()) {
      auto v = stack.back();
      stack.pop_back();
      for (auto w : adj[v])
        if (!seen[w]) {
          seen[w] = true;
          stack.push_back(w);
        }
    }
    for (std::size_t v = 0; v < n; ++v)
      if (!seen[v]) {
        add("p-proclet.3", v < sk.places.size() ? sk.places[v].id : sk.transitions[v - sk.places.size()].id,
            "skeleton is not connected");
        break;
      }
  }
  bool any_source = false, any_sink = false;
  for (std::size_t t = 0; t < sk.transitions.size(); ++t) {
    any_source |= s.pre_places(t).empty();
    any_sink |= s.post_places(t).empty();
  }
  if (!any_source) add("p-proclet.4", "process", "no source transition");
  if (!any_sink) add("p-proclet.4", "process", "no sink transition");

  auto is_start_like = [&](std::size_t t) {
    auto k = sk.transitions[t].kind;
    return k == TransitionKind::start || k == TransitionKind::sink;
  };
  auto is_complete_like = [&](std::size_t t) {
    auto k = sk.transitions[t].kind;
    return k == TransitionKind::complete || k == TransitionKind::source;
  };
  for (std::size_t p = 0; p < sk.places.size(); ++p) {
    const auto& pl = sk.places[p];
    if (s.pre_transitions(p).empty()) add("p-proclet.4", pl.id, "place without pre-transition");
    if (s.post_transitions(p).empty()) add("p-proclet.4", pl.id, "place without post-transition");
    if (pl.kind == PlaceKind::activity) {
      for (auto t : s.pre_transitions(p))
        if (sk.transitions[t].kind != TransitionKind::start)
          add("p-proclet.5", pl.id, "activity place entered by non-start transition " + sk.transitions[t].id);
      for (auto t : s.post_transitions(p))
        if (sk.transitions[t].kind != TransitionKind::complete)
          add("p-proclet.5", pl.id, "activity place left by non-complete transition " + sk.transitions[t].id);
    } else {
      if (s.pre_transitions(p).size() != 1)
        add("p-proclet.6", pl.id, "handover place needs exactly one incoming transition");
      if (s.post_transitions(p).size() != 1)
        add("p-proclet.6", pl.id, "handover place needs exactly one outgoing transition");
      for (auto t : s.pre_transitions(p))
        if (!is_complete_like(t))
          add("p-proclet.6", pl.id, "handover place entered by non-complete transition " + sk.transitions[t].id);
      for (auto t : s.post_transitions(p))
        if (!is_start_like(t))
          add("p-proclet.6", pl.id, "handover place left by non-start transition " + sk.transitions[t].id);
    }
    if (pl.initial_tokens != 0) add("p-proclet.8", pl.id, "place carries an initial token");
  }

  for (const auto& r : s.resources()) {
    if (r.start_labels.empty() || r.complete_labels.empty())
      add("r-proclet", r.rid, "start and complete label sets must be non-empty");
    for (const auto& l : r.start_labels)
      if (std::find(r.complete_labels.begin(), r.complete_labels.end(), l) != r.complete_labels.end())
        add("r-proclet", r.rid, "label " + l + " is both start and complete");
  }
  for (const auto& q : s.queues())
    if (q.enqueue_label == q.dequeue_label) add("q-proclet", q.qid, "enqueue and dequeue labels coincide");

  // Channel partition: every proclet transition in exactly one label-homogeneous channel.
  std::map<std::string, int> membership;
  for (const auto& c : s.channels())
    for (const auto& m : c.members) {
      ++membership[m.transition];
      std::string label;
      if (m.kind == ProcletKind::process) {
        label = sk.transitions[s.require_transition(m.transition)].label;
      } else {
        label = c.label;
      }
      if (label != c.label) add("pqr.2", m.transition, "channel is not label-homogeneous");
    }
  for (const auto& [t, k] : membership)
    if (k != 1) add("pqr.2", t, "transition in " + std::to_string(k) + " channels");
  for (std::size_t q = 0; q < s.queues().size(); ++q) {
    const auto& qid = s.queues()[q].qid;
    if (!membership.count(enqueue_id(qid))) add("pqr.2", enqueue_id(qid), "transition in no channel");
    if (!membership.count(dequeue_id(qid))) add("pqr.2", dequeue_id(qid), "transition in no channel");
  }

  for (std::size_t p = 0; p < sk.places.size(); ++p) {
    const auto& pl = sk.places[p];
    if (pl.kind == PlaceKind::activity && !s.resource_of_place(p))
      add("pqr.3", pl.id, "activity place has no resource proclet");
    if (pl.kind == PlaceKind::handover) {
      auto q = s.queue_of_place(p);
      if (!q) {
        add("pqr.4", pl.id, "handover place has no queue proclet");
        continue;
      }
      const auto& queue = s.queues()[*q];
      for (auto t : s.pre_transitions(p))
        if (s.queue_enqueuer(*q) != t)
          add("pqr.4", pl.id, "incoming transition " + sk.transitions[t].id + " is not synchronized with " +
                                  enqueue_id(queue.qid));
      for (auto t : s.post_transitions(p))
        if (s.queue_dequeuer(*q) != t)
          add("pqr.4", pl.id, "outgoing transition " + sk.transitions[t].id + " is not synchronized with " +
                                  dequeue_id(queue.qid));
    }
  }
  return out;
}

inline nlohmann::json to_json(const Diagnostic& d) {
  return {{"condition", d.condition}, {"node", d.node}, {"message", d.message}};
}

inline bool fifo_relation(const PQRSystem& s, std::string_view t1, std::string_view tn) {
  return s.fifo(s.require_transition(t1), s.require_transition(tn));
}

inline StepBinding bindings_for(const PQRSystem& s, std::string_view transition_or_label) {
  if (auto t = s.transition_index(transition_or_label)) return s.binding(*t);
  auto ts = s.transitions_with_label(transition_or_label);
  if (ts.empty()) throw ModelError("unknown transition or label " + std::string(transition_or_label));
  auto b = s.binding(ts.front());
  for (std::size_t i = 1; i < ts.size(); ++i) {
    auto o = s.binding(ts[i]);
    if (o.rid != b.rid || o.qid_in != b.qid_in || o.qid_out != b.qid_out)
      throw ModelError("label " + std::string(transition_or_label) + " is ambiguous; name a transition id");
  }
  return b;
}

}  // namespace pqr

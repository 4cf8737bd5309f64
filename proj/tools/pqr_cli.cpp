#include <CLI11.hpp>
#include <json.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "pqr/eval.hpp"
#include "pqr/io.hpp"
#include "pqr/lp.hpp"
#include "pqr/replay.hpp"
#include "pqr/sim.hpp"

namespace {

using nlohmann::json;

struct Failure {
  std::string command;
  std::string message;
  json diagnostics = json::array();
};

// Exit codes: 0 success, 1 domain failure, 2 usage or parse error.
int report(const Failure& f, int code) {
  json j{{"command", f.command}, {"status", code == 1 ? "failed" : "error"}, {"message", f.message}};
  if (!f.diagnostics.empty()) j["diagnostics"] = f.diagnostics;
  std::cerr << j.dump() << "\n";
  return code;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw pqr::Error("cannot write " + path);
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, sep))
    if (!item.empty()) out.push_back(item);
  return out;
}

pqr::ColumnMapping mapping_from(const std::vector<std::string>& items) {
  pqr::ColumnMapping m;
  for (const auto& item : items) {
    auto eq = item.find('=');
    if (eq == std::string::npos) throw pqr::ParseError("column mapping " + item + " is not role=name");
    auto role = item.substr(0, eq), name = item.substr(eq + 1);
    if (role == "event_id") m.event_id = name;
    else if (role == "pid") m.pid = name;
    else if (role == "activity") m.act = name;
    else if (role == "time") m.time = name;
    else if (role == "rid") m.rid = name;
    else if (role == "qid") m.qid = name;
    else if (role == "tmin") m.tmin = name;
    else if (role == "tmax") m.tmax = name;
    else throw pqr::ParseError("unknown column role " + role);
  }
  return m;
}

struct Options {
  std::string model, scenario, log, partial, repaired, truth, output, sensors, segments, segment, mode = "interval",
      dump_lp;
  std::vector<std::string> columns;
  std::optional<std::uint64_t> seed;
  pqr::Millis window = 60000;
  unsigned jobs = 1;
  bool no_boundaries = false;
};

int cmd_validate(const Options& o) {
  auto system = pqr::load_model(o.model);
  auto diags = pqr::validate(system);
  if (!diags.empty()) {
    Failure f{"validate", std::to_string(diags.size()) + " violation(s)"};
    for (const auto& d : diags) f.diagnostics.push_back(pqr::to_json(d));
    return report(f, 1);
  }
  std::cout << "valid: " << system.process().transitions.size() << " transitions, " << system.resources().size()
            << " resources, " << system.queues().size() << " queues\n";
  return 0;
}

int cmd_simulate(const Options& o) {
  auto system = pqr::load_model(o.model);
  auto sc = pqr::load_scenario(o.scenario);
  auto log = pqr::simulate(system, sc, o.seed.value_or(sc.seed));
  pqr::save_log(o.output, log);
  std::cout << "simulated " << log.size() << " events, " << pqr::correlate(log, pqr::EntityType::pid).timed.size()
            << " cases\n";
  return 0;
}

int cmd_partialize(const Options& o) {
  auto map = mapping_from(o.columns);
  auto log = pqr::load_log(o.log, map);
  auto part = pqr::partialize(log, pqr::SensorSet::parse(split(o.sensors, ',')), !o.no_boundaries);
  auto out = open_output(o.output);
  pqr::write_log(out, part, map);
  std::cout << "kept " << part.size() << " of " << log.size() << " events\n";
  return 0;
}

int cmd_repair(const Options& o) {
  auto mode = pqr::apply_mode_from(o.mode);
  if (!mode) return report({"repair", "unknown mode " + o.mode}, 2);
  auto system = pqr::load_model(o.model);
  auto map = mapping_from(o.columns);
  auto partial = pqr::load_log(o.partial, map);
  auto r = pqr::repair(partial, system, o.jobs);
  if (!o.dump_lp.empty()) {
    auto out = open_output(o.dump_lp);
    pqr::write_lp(out, r.constraints);
  }
  Failure warn{"repair", "warnings"};
  for (const auto& w : r.run.warnings) warn.diagnostics.push_back({{"warning", w}});
  if (!warn.diagnostics.empty()) std::cerr << json{{"command", "repair"}, {"warnings", warn.diagnostics}}.dump() << "\n";
  if (!r.solution.feasible) {
    Failure f{"repair", r.solution.message};
    for (const auto& c : r.solution.culprits)
      f.diagnostics.push_back({{"constraint", pqr::detail::describe(r.constraints, c)}});
    if (!r.solution.culprits.empty()) f.diagnostics.push_back({{"events", pqr::culprit_events(r.constraints, r.solution)}});
    return report(f, 1);
  }
  auto log = pqr::apply_solution(r.run, r.constraints, r.solution, *mode);
  auto out = open_output(o.output);
  pqr::write_log(out, log, map);
  std::size_t restored = 0;
  for (const auto& e : r.run.events) restored += !e.observed();
  std::cout << "repaired " << log.size() << " events (" << restored << " restored), objective "
            << r.solution.objective << " ms\n";
  return 0;
}

int cmd_check(const Options& o) {
  auto system = pqr::load_model(o.model);
  auto log = pqr::load_log(o.log, mapping_from(o.columns));
  auto r = pqr::replay_log(system, log);
  if (!r.accepted) {
    Failure f{"check", "log rejected"};
    for (const auto& d : r.diagnostics) f.diagnostics.push_back(pqr::to_json(d));
    return report(f, 1);
  }
  std::cout << "accepted: " << log.size() << " events, " << r.traces.size() << " traces\n";
  return 0;
}

int cmd_eval(const Options& o) {
  auto map = mapping_from(o.columns);
  auto repaired = pqr::load_log(o.repaired, map);
  auto truth = pqr::load_log(o.truth, map);
  std::optional<pqr::PQRSystem> system;
  if (!o.model.empty()) system = pqr::load_model(o.model);
  auto m = pqr::evaluate(repaired, truth, system ? &*system : nullptr);
  auto j = pqr::to_json(m);
  if (!o.segment.empty()) {
    auto seg = pqr::parse_segment(truth, o.segment);
    auto [from, to] = pqr::time_range(truth, o.window);
    auto c = pqr::compare_load(pqr::load_series(truth, seg, o.window, from, to),
                               pqr::load_series(repaired, seg, o.window, from, to));
    j["load"] = {{"segment", seg.name()},   {"window_ms", o.window},         {"mae", c.mae},
                 {"max_load", c.max_load}, {"relative", c.relative},        {"truth_peak_window", c.truth_peak},
                 {"repaired_peak_window", c.repaired_peak}};
  }
  if (!o.output.empty()) open_output(o.output) << j.dump(2) << "\n";
  std::cout << "events " << m.events.size() << ", mae " << m.mae << ", rmse " << m.rmse << ", containment "
            << m.containment << "\n";
  return 0;
}

int cmd_spectrum(const Options& o) {
  auto log = pqr::load_log(o.log, mapping_from(o.columns));
  std::vector<pqr::Segment> segs;
  for (const auto& s : split(o.segments, ',')) segs.push_back(pqr::parse_segment(log, s));
  auto out = open_output(o.output);
  pqr::spectrum_export(out, log, segs);
  std::cout << "wrote " << segs.size() << " segment(s)\n";
  return 0;
}

int cmd_load(const Options& o) {
  auto log = pqr::load_log(o.log, mapping_from(o.columns));
  auto series = pqr::load_series(log, pqr::parse_segment(log, o.segment), o.window);
  auto out = open_output(o.output);
  pqr::write_load(out, series);
  double peak = 0;
  for (const auto& p : series) peak = std::max(peak, p.items_per_minute);
  std::cout << series.size() << " windows, peak " << peak << " items/min\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Repair and analyse partial event logs of queue-resource systems"};
  app.require_subcommand(1);
  Options o;
  app.add_option("--column", o.columns, "Column mapping role=name (event_id, pid, activity, time, rid, qid, tmin, tmax)");

  auto* validate = app.add_subcommand("validate", "Check a model against the proclet conditions");
  validate->add_option("model", o.model)->required()->check(CLI::ExistingFile);

  auto* simulate = app.add_subcommand("simulate", "Generate a complete log from a scenario");
  simulate->add_option("model", o.model)->required()->check(CLI::ExistingFile);
  simulate->add_option("scenario", o.scenario)->required()->check(CLI::ExistingFile);
  simulate->add_option("-o,--output", o.output)->required();
  simulate->add_option("--seed", o.seed);

  auto* partialize = app.add_subcommand("partialize", "Keep sensor events and case boundaries");
  partialize->add_option("log", o.log)->required()->check(CLI::ExistingFile);
  partialize->add_option("--sensors", o.sensors, "Comma-separated labels or label@pid")->required();
  partialize->add_option("-o,--output", o.output)->required();
  partialize->add_flag("--no-boundaries", o.no_boundaries);

  auto* repair = app.add_subcommand("repair", "Restore unobserved events and bound their timestamps");
  repair->add_option("model", o.model)->required()->check(CLI::ExistingFile);
  repair->add_option("partial", o.partial)->required()->check(CLI::ExistingFile);
  repair->add_option("-o,--output", o.output)->required();
  repair->add_option("--mode", o.mode)->check(CLI::IsMember({"interval", "tmin", "tmax"}));
  repair->add_option("--dump-lp", o.dump_lp);
  repair->add_option("--jobs", o.jobs)->check(CLI::PositiveNumber);

  auto* check = app.add_subcommand("check", "Replay a complete log on a model");
  check->add_option("model", o.model)->required()->check(CLI::ExistingFile);
  check->add_option("log", o.log)->required()->check(CLI::ExistingFile);

  auto* eval = app.add_subcommand("eval", "Compare a repaired log with the true log");
  eval->add_option("repaired", o.repaired)->required()->check(CLI::ExistingFile);
  eval->add_option("truth", o.truth)->required()->check(CLI::ExistingFile);
  eval->add_option("-o,--output", o.output);
  eval->add_option("--model", o.model)->check(CLI::ExistingFile);
  eval->add_option("--segment", o.segment);
  eval->add_option("--window", o.window)->check(CLI::PositiveNumber);

  auto* spectrum = app.add_subcommand("spectrum", "Export segment occurrences");
  spectrum->add_option("log", o.log)->required()->check(CLI::ExistingFile);
  spectrum->add_option("--segments", o.segments, "Comma-separated qid or from:to")->required();
  spectrum->add_option("-o,--output", o.output)->required();

  auto* load = app.add_subcommand("load", "Items per minute on a segment");
  load->add_option("log", o.log)->required()->check(CLI::ExistingFile);
  load->add_option("--segment", o.segment)->required();
  load->add_option("--window", o.window)->check(CLI::PositiveNumber);
  load->add_option("-o,--output", o.output)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return report({"", e.what()}, 2);
  }

  auto* sub = app.get_subcommands().front();
  std::string name = sub->get_name();
  try {
    if (sub == validate) return cmd_validate(o);
    if (sub == simulate) return cmd_simulate(o);
    if (sub == partialize) return cmd_partialize(o);
    if (sub == repair) return cmd_repair(o);
    if (sub == check) return cmd_check(o);
    if (sub == eval) return cmd_eval(o);
    if (sub == spectrum) return cmd_spectrum(o);
    if (sub == load) return cmd_load(o);
  } catch (const pqr::ParseError& e) {
    return report({name, e.what()}, 2);
  } catch (const nlohmann::json::exception& e) {
    return report({name, e.what()}, 2);
  } catch (const pqr::ModelError& e) {
    return report({name, e.what()}, name == "validate" ? 2 : 1);
  } catch (const pqr::LogError& e) {
    return report({name, e.what()}, 1);
  } catch (const pqr::RestoreError& e) {
    return report({name, e.what()}, 1);
  } catch (const pqr::ConstraintError& e) {
    return report({name, e.what()}, 1);
  } catch (const pqr::Error& e) {
    return report({name, e.what()}, 2);
  }
  return 2;
}

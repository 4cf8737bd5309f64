#pragma once

#include <fstream>
#include <sstream>
#include <string>

#include "pqr/error.hpp"
#include "pqr/event_log.hpp"
#include "pqr/pqr_model.hpp"

namespace pqr {

inline std::ifstream open_input(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  return in;
}

inline PQRSystem load_model(const std::string& path) {
  auto in = open_input(path);
  return parse_model(in);
}

inline MultiEntityLog load_log(const std::string& path, const ColumnMapping& map = {}) {
  auto in = open_input(path);
  return parse_log(in, map);
}

inline void save_log(const std::string& path, const MultiEntityLog& log, const ColumnMapping& map = {}) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  write_log(out, log, map);
}

inline std::string log_to_string(const MultiEntityLog& log) {
  std::ostringstream out;
  write_log(out, log);
  return out.str();
}

inline MultiEntityLog log_from_string(const std::string& text, const ColumnMapping& map = {}) {
  std::istringstream in(text);
  return parse_log(in, map);
}

}  // namespace pqr

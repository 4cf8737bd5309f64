#pragma once

#include <string>

#include "pqr/io.hpp"

namespace fixtures {

inline std::string data(const std::string& rel) { return std::string(PQR_DATA_DIR) + "/" + rel; }

inline const pqr::PQRSystem& baggage() {
  static const pqr::PQRSystem s = pqr::load_model(data("models/baggage.json"));
  return s;
}

inline pqr::MultiEntityLog complete_log() { return pqr::load_log(data("logs/complete.csv")); }
inline pqr::MultiEntityLog partial_log() { return pqr::load_log(data("logs/partial.csv")); }

inline pqr::Millis at(const std::string& hms) { return *pqr::parse_time("2020-01-01T" + hms + "Z"); }

}  // namespace fixtures

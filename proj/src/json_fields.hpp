#pragma once

// Helpers for reading config objects with errors that carry JSON-pointer-like
// field paths ("/trainer/lr_end: ...").

#include <nlohmann/json.hpp>
#include <string>

#include "inpaint/errors.hpp"

namespace inpaint::json_fields {

inline std::string type_name(const nlohmann::json& j) { return j.type_name(); }

// Reads j[key] into out when present; leaves out untouched otherwise.
template <class T>
void read(const nlohmann::json& j, const char* key, T& out) {
  if (!j.is_object()) throw ConfigError(": expected an object, got " + type_name(j));
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return;
  try {
    out = it->get<T>();
  } catch (const ConfigError& e) {
    throw ConfigError("/" + std::string(key) + e.what());
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("/" + std::string(key) + ": unexpected " + type_name(*it));
  }
}

template <class T>
void require(const nlohmann::json& j, const char* key, T& out) {
  if (!j.is_object() || !j.contains(key)) {
    throw ConfigError("/" + std::string(key) + ": required field missing");
  }
  read(j, key, out);
}

// Runs fn, prefixing any ConfigError message with "/key".
template <class Fn>
void nested(const char* key, Fn&& fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    throw ConfigError("/" + std::string(key) + e.what());
  }
}

}  // namespace inpaint::json_fields

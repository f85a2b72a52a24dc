// Copyright (c) 2026 The dtdenoise Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <initializer_list>
#include <string>

#include <json.hpp>

#include "dtdenoise/errors.hpp"

namespace dtd {
namespace detail {

/// Rejects any key of `j` that is not in `allowed`, naming the offending
/// field as `<prefix><key>` so nested sections produce paths like
/// "model.window".
inline void reject_unknown_keys(const nlohmann::json& j, const std::string& prefix,
                                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError("config: " + prefix + " section must be an object");
  for (const auto& item : j.items()) {
    bool known = false;
    for (const char* k : allowed) {
      if (item.key() == k) {
        known = true;
        break;
      }
    }
    if (!known) throw ConfigError("config: unknown key \"" + prefix + item.key() + "\"");
  }
}

// Each getter leaves `dst` untouched when the key is absent and names the
// field on a type mismatch.

inline void get_int(const nlohmann::json& j, const std::string& prefix, const char* key,
                    int& dst) {
  if (!j.contains(key)) return;
  if (!j[key].is_number_integer() && !j[key].is_number_unsigned()) {
    throw ConfigError("config: \"" + prefix + key + "\" must be an integer");
  }
  dst = j[key].get<int>();
}

inline void get_i64(const nlohmann::json& j, const std::string& prefix, const char* key,
                    std::int64_t& dst) {
  if (!j.contains(key)) return;
  if (!j[key].is_number_integer() && !j[key].is_number_unsigned()) {
    throw ConfigError("config: \"" + prefix + key + "\" must be an integer");
  }
  dst = j[key].get<std::int64_t>();
}

inline void get_u64(const nlohmann::json& j, const std::string& prefix, const char* key,
                    std::uint64_t& dst) {
  if (!j.contains(key)) return;
  if (!j[key].is_number_unsigned() && !(j[key].is_number_integer() && j[key].get<std::int64_t>() >= 0)) {
    throw ConfigError("config: \"" + prefix + key + "\" must be a non-negative integer");
  }
  dst = j[key].get<std::uint64_t>();
}

inline void get_double(const nlohmann::json& j, const std::string& prefix, const char* key,
                       double& dst) {
  if (!j.contains(key)) return;
  if (!j[key].is_number()) {
    throw ConfigError("config: \"" + prefix + key + "\" must be a number");
  }
  dst = j[key].get<double>();
}

inline void get_bool(const nlohmann::json& j, const std::string& prefix, const char* key,
                     bool& dst) {
  if (!j.contains(key)) return;
  if (!j[key].is_boolean()) {
    throw ConfigError("config: \"" + prefix + key + "\" must be a boolean");
  }
  dst = j[key].get<bool>();
}

inline void get_string(const nlohmann::json& j, const std::string& prefix, const char* key,
                       std::string& dst) {
  if (!j.contains(key)) return;
  if (!j[key].is_string()) {
    throw ConfigError("config: \"" + prefix + key + "\" must be a string");
  }
  dst = j[key].get<std::string>();
}

}  // namespace detail
}  // namespace dtd

#pragma once

#include <initializer_list>
#include <stdexcept>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

namespace gsr {

/// Invalid configuration value; the message names the offending field.
class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string& field, const std::string& message)
      : std::invalid_argument(field + ": " + message), field_(field) {}
  const std::string& field() const { return field_; }

 private:
  std::string field_;
};

inline void reject_unknown_keys(const nlohmann::json& j, std::string_view context,
                                std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ConfigError(std::string(context), "expected an object");
  for (const auto& [key, _] : j.items()) {
    bool known = false;
    for (auto a : allowed) known = known || key == a;
    if (!known) {
      throw ConfigError(std::string(context) + (context.empty() ? "" : ".") + key,
                        "unknown key");
    }
  }
}

/// Reads j[key] into out if present, re-throwing type errors as ConfigError.
template <typename T>
void read_optional(const nlohmann::json& j, const char* key, T& out, std::string_view context) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string(context) + (context.empty() ? "" : ".") + key,
                      "wrong type (" + std::string(e.what()) + ")");
  }
}

}  // namespace gsr

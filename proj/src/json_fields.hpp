#pragma once

#include "pentrack/errors.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <string>
#include <type_traits>

namespace pentrack::detail {

// JSON field access with ConfigInvalid naming the full path.
class Fields {
 public:
  Fields(const nlohmann::json& obj, std::string prefix) : obj_(obj), prefix_(std::move(prefix)) {
    if (!obj_.is_object()) {
      throw ConfigInvalid(prefix_.empty() ? "<root>" : prefix_, "expected an object");
    }
  }

  std::string name(const std::string& key) const {
    return prefix_.empty() ? key : prefix_ + "." + key;
  }

  bool has(const std::string& key) const { return obj_.contains(key); }
  const nlohmann::json& at(const std::string& key) const { return obj_.at(key); }

  void number(const std::string& key, double& out) const {
    if (!has(key)) {
      return;
    }
    const nlohmann::json& v = obj_.at(key);
    if (!v.is_number()) {
      throw ConfigInvalid(name(key), "expected a number");
    }
    out = v.get<double>();
    if (!std::isfinite(out)) {
      throw ConfigInvalid(name(key), "must be finite");
    }
  }

  template <typename Int>
  void integer(const std::string& key, Int& out) const {
    if (!has(key)) {
      return;
    }
    const nlohmann::json& v = obj_.at(key);
    if (!v.is_number_integer()) {
      throw ConfigInvalid(name(key), "expected an integer");
    }
    if constexpr (std::is_unsigned_v<Int>) {
      if (v.is_number_unsigned()) {
        out = v.get<Int>();
        return;
      }
      if (v.get<long long>() < 0) {
        throw ConfigInvalid(name(key), "must be non-negative");
      }
    }
    out = static_cast<Int>(v.get<long long>());
  }

  void only(std::initializer_list<const char*> keys) const {
    for (const auto& [k, v] : obj_.items()) {
      if (std::none_of(keys.begin(), keys.end(), [&](const char* a) { return k == a; })) {
        throw ConfigInvalid(name(k), "unknown field");
      }
    }
  }

 private:
  const nlohmann::json& obj_;
  std::string prefix_;
};

}  // namespace pentrack::detail

#pragma once

#include <cstdint>
#include <initializer_list>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

namespace wsrl {

// Execution-time keyword value: integer, real, boolean or string.
class KwValue {
 public:
  using Storage = std::variant<int64_t, double, bool, std::string>;

  KwValue(int v) : value_(static_cast<int64_t>(v)) {}
  KwValue(int64_t v) : value_(v) {}
  KwValue(double v) : value_(v) {}
  KwValue(bool v) : value_(v) {}
  KwValue(const char* v) : value_(std::string(v)) {}
  KwValue(std::string v) : value_(std::move(v)) {}

  const Storage& storage() const { return value_; }
  bool operator==(const KwValue& other) const = default;

 private:
  Storage value_;
};

// Keyword arguments forwarded unchanged through agent containers. Ordered so
// that encoding is deterministic.
class KwArgs {
 public:
  KwArgs() = default;
  KwArgs(std::initializer_list<std::pair<const std::string, KwValue>> items) : items_(items) {}

  KwArgs& set(const std::string& key, KwValue value);
  bool contains(std::string_view key) const;
  const KwValue& at(std::string_view key) const;

  int64_t get_int(std::string_view key) const;
  std::optional<int64_t> find_int(std::string_view key) const;
  double get_double(std::string_view key) const;
  double get_double(std::string_view key, double fallback) const;
  bool get_bool(std::string_view key, bool fallback) const;
  std::string get_string(std::string_view key) const;
  std::optional<std::string> find_string(std::string_view key) const;

  // Copy with the given keys removed.
  KwArgs without(std::initializer_list<std::string_view> keys) const;
  KwArgs with(const std::string& key, KwValue value) const;

  const std::map<std::string, KwValue, std::less<>>& items() const { return items_; }
  bool operator==(const KwArgs& other) const { return items_ == other.items_; }

 private:
  std::map<std::string, KwValue, std::less<>> items_;
};

}  // namespace wsrl

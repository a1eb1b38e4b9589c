#include "wsrl/kwargs.hpp"

#include <cmath>

#include "wsrl/errors.hpp"

namespace wsrl {

KwArgs& KwArgs::set(const std::string& key, KwValue value) {
  items_.insert_or_assign(key, std::move(value));
  return *this;
}

bool KwArgs::contains(std::string_view key) const { return items_.find(key) != items_.end(); }

const KwValue& KwArgs::at(std::string_view key) const {
  auto it = items_.find(key);
  if (it == items_.end()) throw KwArgError("missing keyword argument '" + std::string(key) + "'");
  return it->second;
}

int64_t KwArgs::get_int(std::string_view key) const {
  const auto& v = at(key).storage();
  if (const auto* i = std::get_if<int64_t>(&v)) return *i;
  if (const auto* d = std::get_if<double>(&v)) {
    if (std::floor(*d) == *d) return static_cast<int64_t>(*d);
  }
  throw KwArgError("keyword argument '" + std::string(key) + "' is not an integer");
}

std::optional<int64_t> KwArgs::find_int(std::string_view key) const {
  if (!contains(key)) return std::nullopt;
  return get_int(key);
}

double KwArgs::get_double(std::string_view key) const {
  const auto& v = at(key).storage();
  if (const auto* d = std::get_if<double>(&v)) return *d;
  if (const auto* i = std::get_if<int64_t>(&v)) return static_cast<double>(*i);
  throw KwArgError("keyword argument '" + std::string(key) + "' is not a number");
}

double KwArgs::get_double(std::string_view key, double fallback) const {
  return contains(key) ? get_double(key) : fallback;
}

bool KwArgs::get_bool(std::string_view key, bool fallback) const {
  if (!contains(key)) return fallback;
  const auto& v = at(key).storage();
  if (const auto* b = std::get_if<bool>(&v)) return *b;
  if (const auto* i = std::get_if<int64_t>(&v)) return *i != 0;
  throw KwArgError("keyword argument '" + std::string(key) + "' is not a boolean");
}

std::string KwArgs::get_string(std::string_view key) const {
  const auto& v = at(key).storage();
  if (const auto* s = std::get_if<std::string>(&v)) return *s;
  throw KwArgError("keyword argument '" + std::string(key) + "' is not a string");
}

std::optional<std::string> KwArgs::find_string(std::string_view key) const {
  if (!contains(key)) return std::nullopt;
  return get_string(key);
}

KwArgs KwArgs::without(std::initializer_list<std::string_view> keys) const {
  KwArgs out = *this;
  for (auto k : keys) {
    auto it = out.items_.find(k);
    if (it != out.items_.end()) out.items_.erase(it);
  }
  return out;
}

KwArgs KwArgs::with(const std::string& key, KwValue value) const {
  KwArgs out = *this;
  out.set(key, std::move(value));
  return out;
}

}  // namespace wsrl

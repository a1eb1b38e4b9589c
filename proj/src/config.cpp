#include "wsrl/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <optional>
#include <sstream>

#include "wsrl/errors.hpp"

namespace wsrl {

namespace {

enum class Type { kInt, kFloat, kBool, kString };

struct Field {
  const char* key;
  Type type;
  std::function<void(TrainConfig&, const ConfigValue&)> set;
  std::function<ConfigValue(const TrainConfig&)> get;
};

template <typename T>
Field field(const char* key, T TrainConfig::*member) {
  Type type;
  if constexpr (std::is_same_v<T, bool>) {
    type = Type::kBool;
  } else if constexpr (std::is_integral_v<T>) {
    type = Type::kInt;
  } else if constexpr (std::is_floating_point_v<T>) {
    type = Type::kFloat;
  } else {
    type = Type::kString;
  }
  return Field{
      key, type,
      [member](TrainConfig& c, const ConfigValue& v) {
        if constexpr (std::is_same_v<T, bool>) {
          c.*member = std::get<bool>(v);
        } else if constexpr (std::is_integral_v<T>) {
          c.*member = static_cast<T>(std::get<int64_t>(v));
        } else if constexpr (std::is_floating_point_v<T>) {
          c.*member = std::get<double>(v);
        } else {
          c.*member = std::get<std::string>(v);
        }
      },
      [member](const TrainConfig& c) -> ConfigValue {
        if constexpr (std::is_same_v<T, bool>) {
          return c.*member;
        } else if constexpr (std::is_integral_v<T>) {
          return static_cast<int64_t>(c.*member);
        } else if constexpr (std::is_floating_point_v<T>) {
          return static_cast<double>(c.*member);
        } else {
          return c.*member;
        }
      }};
}

const std::vector<Field>& fields() {
  static const std::vector<Field> all = {
      field("env.name", &TrainConfig::env),
      field("env.n_envs", &TrainConfig::n_envs),
      field("algo.gamma", &TrainConfig::gamma),
      field("algo.lr", &TrainConfig::learning_rate),
      field("algo.n_steps", &TrainConfig::n_steps),
      field("algo.entropy_coef", &TrainConfig::entropy_coef),
      field("algo.critic_coef", &TrainConfig::critic_coef),
      field("algo.max_grad_norm", &TrainConfig::max_grad_norm),
      field("algo.epsilon_start", &TrainConfig::epsilon_start),
      field("algo.epsilon_end", &TrainConfig::epsilon_end),
      field("algo.epsilon_decay_steps", &TrainConfig::epsilon_decay_steps),
      field("algo.target_update", &TrainConfig::target_update),
      field("algo.replay_capacity", &TrainConfig::replay_capacity),
      field("algo.batch_size", &TrainConfig::batch_size),
      field("algo.learning_starts", &TrainConfig::learning_starts),
      field("algo.updates_per_rollout", &TrainConfig::updates_per_rollout),
      field("algo.bc_iterations", &TrainConfig::bc_iterations),
      field("model.policy", &TrainConfig::policy),
      field("model.hidden", &TrainConfig::hidden),
      field("run.total_steps", &TrainConfig::total_steps),
      field("run.seed", &TrainConfig::seed),
      field("run.num_processes", &TrainConfig::num_processes),
      field("run.log_path", &TrainConfig::log_path),
      field("run.log_wallclock", &TrainConfig::log_wallclock),
      field("run.eval_episodes", &TrainConfig::eval_episodes),
  };
  return all;
}

const Field* find_field(std::string_view key) {
  for (const auto& f : fields()) {
    if (key == f.key) return &f;
  }
  return nullptr;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

const char* type_name(Type t) {
  switch (t) {
    case Type::kInt: return "integer";
    case Type::kFloat: return "float";
    case Type::kBool: return "boolean";
    default: return "string";
  }
}

std::optional<ConfigValue> parse_value(std::string_view raw, Type type) {
  switch (type) {
    case Type::kInt: {
      int64_t v = 0;
      const auto [end, ec] = std::from_chars(raw.data(), raw.data() + raw.size(), v);
      if (ec != std::errc() || end != raw.data() + raw.size()) return std::nullopt;
      return v;
    }
    case Type::kFloat: {
      // strtod accepts forms from_chars does not need to; reject trailing junk.
      const std::string s(raw);
      char* end = nullptr;
      const double v = std::strtod(s.c_str(), &end);
      if (s.empty() || end != s.c_str() + s.size() || !std::isfinite(v)) return std::nullopt;
      return v;
    }
    case Type::kBool:
      if (raw == "true") return true;
      if (raw == "false") return false;
      return std::nullopt;
    default:
      if (raw.size() >= 2 && raw.front() == '"' && raw.back() == '"') return std::string(raw.substr(1, raw.size() - 2));
      return std::string(raw);
  }
}

std::string format_value(const ConfigValue& v) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, bool>) {
          return x ? "true" : "false";
        } else if constexpr (std::is_same_v<T, double>) {
          std::ostringstream os;
          os.precision(17);
          os << x;
          return os.str();
        } else if constexpr (std::is_same_v<T, int64_t>) {
          return std::to_string(x);
        } else {
          return "\"" + x + "\"";
        }
      },
      v);
}

}  // namespace

void TrainConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError(what, 0); };
  if (!(gamma >= 0.0 && gamma <= 1.0)) fail("algo.gamma must lie in [0, 1]");
  if (n_steps < 1) fail("algo.n_steps must be >= 1");
  if (n_envs < 1) fail("env.n_envs must be >= 1");
  if (num_processes < 1) fail("run.num_processes must be >= 1");
  if (n_envs % num_processes != 0) fail("env.n_envs must be a multiple of run.num_processes");
  if (!(learning_rate > 0.0)) fail("algo.lr must be positive");
  if (total_steps < 1) fail("run.total_steps must be >= 1");
  if (hidden < 1) fail("model.hidden must be >= 1");
  if (policy != "mlp" && policy != "recurrent") fail("model.policy must be 'mlp' or 'recurrent'");
  if (epsilon_start < 0.0 || epsilon_start > 1.0 || epsilon_end < 0.0 || epsilon_end > 1.0) {
    fail("algo.epsilon_start and algo.epsilon_end must lie in [0, 1]");
  }
  if (epsilon_decay_steps < 1 || target_update < 1 || replay_capacity < 1 || batch_size < 1 ||
      updates_per_rollout < 1 || bc_iterations < 1 || eval_episodes < 1) {
    fail("step counts, sizes and periods must be >= 1");
  }
  if (learning_starts < 0 || max_grad_norm < 0.0 || entropy_coef < 0.0 || critic_coef < 0.0) {
    fail("coefficients and algo.learning_starts must be nonnegative");
  }
}

Config parse_config(std::string_view text) {
  Config config;
  int line_no = 0;
  size_t pos = 0;
  while (pos <= text.size()) {
    const size_t eol = std::min(text.find('\n', pos), text.size());
    std::string_view line = text.substr(pos, eol - pos);
    pos = eol + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'", line_no);
    }
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view raw = trim(line.substr(eq + 1));
    const Field* f = find_field(key);
    if (!f) throw ConfigError("line " + std::to_string(line_no) + ": unknown key '" + key + "'", line_no);
    auto value = parse_value(raw, f->type);
    if (!value || raw.empty()) {
      throw ConfigError("line " + std::to_string(line_no) + ": '" + key + "' expects a " + type_name(f->type) +
                            ", got '" + std::string(raw) + "'",
                        line_no);
    }
    if (auto it = config.entries.find(key); it != config.entries.end()) {
      config.warnings.push_back("line " + std::to_string(line_no) + ": '" + key + "' repeats line " +
                                std::to_string(it->second.line) + "; the later value wins");
    }
    config.entries[key] = ConfigEntry{std::move(*value), line_no};
    if (eol == text.size()) break;
  }
  return config;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open config file " + path.string(), 0);
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

TrainConfig to_train_config(const Config& config) {
  TrainConfig out;
  for (const auto& [key, entry] : config.entries) {
    const Field* f = find_field(key);
    if (!f) throw ConfigError("unknown key '" + key + "'", entry.line);
    if (f->key == std::string_view("run.seed") && std::get<int64_t>(entry.value) < 0) {
      throw ConfigError("line " + std::to_string(entry.line) + ": run.seed must be nonnegative", entry.line);
    }
    f->set(out, entry.value);
  }
  out.validate();
  return out;
}

std::string format_config(const TrainConfig& config) {
  std::string out;
  for (const auto& f : fields()) out += std::string(f.key) + " = " + format_value(f.get(config)) + "\n";
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> keys;
  for (const auto& f : fields()) keys.emplace_back(f.key);
  return keys;
}

}  // namespace wsrl

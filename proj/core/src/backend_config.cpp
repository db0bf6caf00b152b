#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "phishintent/backend.hpp"

namespace phishintent {

using nlohmann::json;

namespace {

const std::set<std::string> kKnownKeys = {
    "name",        "kind",           "endpoint",         "model_id",
    "api_key_env", "timeout_ms",     "max_retries",      "requests_per_minute",
    "temperature", "max_tokens",     "retry_base_delay_ms", "retry_max_delay_ms",
    "input_usd_per_mtok", "output_usd_per_mtok", "script",  "fallback",
};

template <typename T>
T get_or(const json& obj, const char* key, T fallback, const std::string& where) {
  auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return fallback;
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw std::invalid_argument(where + "field '" + key + "' has the wrong type");
  }
}

BackendConfig parse_one(const json& entry, const std::filesystem::path& base_dir,
                        std::size_t index) {
  std::string where = "models[" + std::to_string(index) + "]: ";
  if (!entry.is_object()) throw std::invalid_argument(where + "expected an object");
  for (const auto& [key, value] : entry.items()) {
    if (key == "api_key" || key == "key" || key == "token") {
      throw std::invalid_argument(where + "API keys must not appear in config; name the "
                                          "environment variable with 'api_key_env'");
    }
    if (!kKnownKeys.count(key)) throw std::invalid_argument(where + "unknown field '" + key + "'");
  }

  BackendConfig config;
  config.name = get_or<std::string>(entry, "name", "", where);
  if (!config.name.empty()) where = "model '" + config.name + "': ";
  try {
    config.kind = parse_backend_kind(get_or<std::string>(entry, "kind", "", where));
  } catch (const std::invalid_argument& e) {
    throw std::invalid_argument(where + e.what());
  }
  config.endpoint = get_or<std::string>(entry, "endpoint", "", where);
  config.model_id = get_or<std::string>(entry, "model_id", config.name, where);
  config.api_key_env = get_or<std::string>(entry, "api_key_env", "", where);
  config.timeout = std::chrono::milliseconds(
      get_or<long long>(entry, "timeout_ms", config.timeout.count(), where));
  config.max_retries = get_or<int>(entry, "max_retries", config.max_retries, where);
  config.requests_per_minute =
      get_or<double>(entry, "requests_per_minute", config.requests_per_minute, where);
  config.retry_base_delay = std::chrono::milliseconds(
      get_or<long long>(entry, "retry_base_delay_ms", config.retry_base_delay.count(), where));
  config.retry_max_delay = std::chrono::milliseconds(
      get_or<long long>(entry, "retry_max_delay_ms", config.retry_max_delay.count(), where));
  config.decode.temperature = get_or<double>(entry, "temperature", 0.0, where);
  config.decode.max_output_tokens = get_or<int>(entry, "max_tokens", 1024, where);
  if (entry.contains("input_usd_per_mtok") || entry.contains("output_usd_per_mtok")) {
    config.prices = PriceTable{get_or<double>(entry, "input_usd_per_mtok", 0.0, where),
                               get_or<double>(entry, "output_usd_per_mtok", 0.0, where)};
  }
  if (auto script = get_or<std::string>(entry, "script", "", where); !script.empty()) {
    std::filesystem::path path(script);
    config.script_path = path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  }
  if (entry.contains("fallback") && !entry["fallback"].is_null()) {
    config.script_fallback = get_or<std::string>(entry, "fallback", "", where);
  }
  config.validate();
  return config;
}

}  // namespace

std::vector<BackendConfig> parse_backend_configs(std::string_view json_text,
                                                 const std::filesystem::path& base_dir) {
  json root = json::parse(json_text, nullptr, /*allow_exceptions=*/false);
  if (root.is_discarded()) throw std::invalid_argument("model config is not valid JSON");
  if (!root.is_object() || !root.contains("models") || !root["models"].is_array()) {
    throw std::invalid_argument("model config must be an object with a 'models' array");
  }
  std::vector<BackendConfig> configs;
  std::set<std::string> names;
  for (std::size_t i = 0; i < root["models"].size(); ++i) {
    configs.push_back(parse_one(root["models"][i], base_dir, i));
    if (!names.insert(configs.back().name).second) {
      throw std::invalid_argument("duplicate model name '" + configs.back().name + "'");
    }
  }
  if (configs.empty()) throw std::invalid_argument("model config declares no models");
  return configs;
}

std::vector<BackendConfig> load_backend_configs(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot open model config '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_backend_configs(buffer.str(), path.parent_path());
}

}  // namespace phishintent

#include "phishintent/backend.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <thread>

#include <json.hpp>

namespace phishintent {

using nlohmann::json;

std::string_view backend_kind_name(BackendKind kind) noexcept {
  switch (kind) {
    case BackendKind::OpenAiCompatible:
      return "openai_compatible";
    case BackendKind::AnthropicStyle:
      return "anthropic_style";
    case BackendKind::LocalServer:
      return "local_server";
    case BackendKind::ScriptedMock:
      return "scripted_mock";
    case BackendKind::HeuristicMock:
      return "heuristic_mock";
  }
  return "";
}

BackendKind parse_backend_kind(std::string_view text) {
  for (auto kind : {BackendKind::OpenAiCompatible, BackendKind::AnthropicStyle,
                    BackendKind::LocalServer, BackendKind::ScriptedMock,
                    BackendKind::HeuristicMock}) {
    if (backend_kind_name(kind) == text) return kind;
  }
  throw std::invalid_argument("unknown backend kind '" + std::string(text) + "'");
}

bool is_remote(BackendKind kind) noexcept {
  return kind == BackendKind::OpenAiCompatible || kind == BackendKind::AnthropicStyle ||
         kind == BackendKind::LocalServer;
}

std::string_view backend_error_name(BackendError::Kind kind) noexcept {
  switch (kind) {
    case BackendError::Kind::Auth:
      return "AuthError";
    case BackendError::Kind::RateLimited:
      return "RateLimited";
    case BackendError::Kind::Timeout:
      return "Timeout";
    case BackendError::Kind::MalformedUpstreamResponse:
      return "MalformedUpstreamResponse";
    case BackendError::Kind::UpstreamStatus:
      return "UpstreamStatus";
    case BackendError::Kind::MissingScriptEntry:
      return "MissingScriptEntry";
    case BackendError::Kind::InvalidRequest:
      return "InvalidRequest";
  }
  return "";
}

void BackendConfig::validate() const {
  if (name.empty()) throw std::invalid_argument("backend config: name is empty");
  const std::string where = "backend '" + name + "': ";
  if (timeout.count() <= 0) throw std::invalid_argument(where + "timeout must be positive");
  if (max_retries < 0) throw std::invalid_argument(where + "max_retries must be >= 0");
  if (!(requests_per_minute > 0)) {
    throw std::invalid_argument(where + "requests_per_minute must be positive");
  }
  if (decode.max_output_tokens <= 0) {
    throw std::invalid_argument(where + "max_output_tokens must be positive");
  }
  if (is_remote(kind)) {
    if (endpoint.empty()) throw std::invalid_argument(where + "endpoint is required");
    if (model_id.empty()) throw std::invalid_argument(where + "model_id is required");
  }
  if ((kind == BackendKind::OpenAiCompatible || kind == BackendKind::AnthropicStyle) &&
      api_key_env.empty()) {
    throw std::invalid_argument(where + "api_key_env is required for hosted APIs");
  }
  if (kind == BackendKind::ScriptedMock && script_path.empty()) {
    throw std::invalid_argument(where + "script path is required");
  }
}

CompletionRequest CompletionRequest::from_bundle(const PromptBundle& bundle) {
  return CompletionRequest{bundle.text, bundle.email_id, bundle.kind, bundle.mode};
}

// ---- time ------------------------------------------------------------------

void SteadyClock::sleep_for(Duration d) {
  if (d.count() > 0) std::this_thread::sleep_for(d);
}

std::shared_ptr<Clock> system_clock() {
  static auto clock = std::make_shared<SteadyClock>();
  return clock;
}

RateLimiter::RateLimiter(double requests_per_minute, std::shared_ptr<Clock> clock)
    : capacity_(static_cast<std::size_t>(std::max(1.0, std::floor(requests_per_minute)))),
      clock_(std::move(clock)) {}

void RateLimiter::acquire() {
  constexpr Clock::Duration kWindow = std::chrono::seconds(60);
  std::lock_guard lock(mutex_);
  auto now = clock_->now();
  while (!window_.empty() && window_.front() + kWindow <= now) window_.pop_front();
  if (window_.size() >= capacity_) {
    // Holding the lock while waiting keeps acquisitions in FIFO order.
    clock_->sleep_for(window_.front() + kWindow - now);
    now = clock_->now();
    while (!window_.empty() && window_.front() + kWindow <= now) window_.pop_front();
  }
  window_.push_back(now);
}

// ---- wire formats ----------------------------------------------------------

std::string openai_request_body(const BackendConfig& config, std::string_view prompt) {
  json body = {
      {"model", config.model_id},
      {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
      {"temperature", config.decode.temperature},
      {"max_tokens", config.decode.max_output_tokens},
  };
  return body.dump();
}

std::string anthropic_request_body(const BackendConfig& config, std::string_view prompt) {
  json body = {
      {"model", config.model_id},
      {"max_tokens", config.decode.max_output_tokens},
      {"temperature", config.decode.temperature},
      {"messages", json::array({{{"role", "user"}, {"content", prompt}}})},
  };
  return body.dump();
}

namespace {

[[noreturn]] void malformed(const std::string& why) {
  throw BackendError(BackendError::Kind::MalformedUpstreamResponse,
                     "malformed upstream response: " + why);
}

json parse_json_body(std::string_view body) {
  json parsed = json::parse(body, nullptr, /*allow_exceptions=*/false);
  if (parsed.is_discarded()) malformed("body is not JSON");
  if (!parsed.is_object()) malformed("body is not a JSON object");
  return parsed;
}

std::optional<long long> int_field(const json& obj, const char* key) {
  if (!obj.is_object()) return std::nullopt;
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_number_integer()) return std::nullopt;
  return it->get<long long>();
}

}  // namespace

std::pair<std::string, std::optional<TokenUsage>> parse_openai_response(std::string_view body) {
  const json parsed = parse_json_body(body);
  auto choices = parsed.find("choices");
  if (choices == parsed.end() || !choices->is_array() || choices->empty()) {
    malformed("no choices");
  }
  const json& first = (*choices)[0];
  std::string text;
  if (auto message = first.find("message");
      message != first.end() && message->is_object() && message->contains("content") &&
      (*message)["content"].is_string()) {
    text = (*message)["content"].get<std::string>();
  } else if (auto legacy = first.find("text"); legacy != first.end() && legacy->is_string()) {
    text = legacy->get<std::string>();
  } else {
    malformed("first choice has no message content");
  }

  std::optional<TokenUsage> usage;
  if (auto u = parsed.find("usage"); u != parsed.end() && u->is_object()) {
    auto in = int_field(*u, "prompt_tokens");
    auto out = int_field(*u, "completion_tokens");
    if (in && out) usage = TokenUsage{*in, *out};
  }
  return {std::move(text), usage};
}

std::pair<std::string, std::optional<TokenUsage>> parse_anthropic_response(
    std::string_view body) {
  const json parsed = parse_json_body(body);
  auto content = parsed.find("content");
  if (content == parsed.end() || !content->is_array()) malformed("no content array");
  std::string text;
  bool found = false;
  for (const auto& block : *content) {
    if (block.is_object() && block.value("type", "") == "text" && block.contains("text") &&
        block["text"].is_string()) {
      text += block["text"].get<std::string>();
      found = true;
    }
  }
  if (!found) malformed("content has no text block");

  std::optional<TokenUsage> usage;
  if (auto u = parsed.find("usage"); u != parsed.end() && u->is_object()) {
    auto in = int_field(*u, "input_tokens");
    auto out = int_field(*u, "output_tokens");
    if (in && out) usage = TokenUsage{*in, *out};
  }
  return {std::move(text), usage};
}

std::optional<double> estimate_cost(const std::optional<PriceTable>& prices,
                                    const std::optional<TokenUsage>& usage) {
  if (!prices || !usage) return std::nullopt;
  return (static_cast<double>(usage->input_tokens) * prices->input_per_mtok +
          static_cast<double>(usage->output_tokens) * prices->output_per_mtok) /
         1'000'000.0;
}

// ---- remote backend --------------------------------------------------------

namespace {

std::optional<std::string> process_getenv(const std::string& name) {
  if (const char* value = std::getenv(name.c_str()); value && *value) return std::string(value);
  return std::nullopt;
}

bool transient_status(int status) {
  return status == 408 || status == 429 || status == 500 || status == 502 || status == 503 ||
         status == 504;
}

class RemoteBackend final : public Backend {
 public:
  RemoteBackend(BackendConfig config, BackendDeps deps)
      : Backend(std::move(config)),
        transport_(deps.transport ? std::move(deps.transport) : default_transport()),
        clock_(deps.clock ? std::move(deps.clock) : system_clock()),
        getenv_(deps.getenv ? std::move(deps.getenv) : process_getenv),
        limiter_(this->config().requests_per_minute, clock_) {}

  CompletionResponse complete(const CompletionRequest& request) override {
    const BackendConfig& cfg = config();
    if (request.prompt.empty()) {
      throw BackendError(BackendError::Kind::InvalidRequest, "empty prompt");
    }

    HttpRequest http;
    http.url = cfg.endpoint;
    http.timeout = cfg.timeout;
    http.headers.emplace_back("Content-Type", "application/json");
    const bool anthropic = cfg.kind == BackendKind::AnthropicStyle;

    std::optional<std::string> key;
    if (!cfg.api_key_env.empty()) key = getenv_(cfg.api_key_env);
    if (!key && cfg.kind != BackendKind::LocalServer) {
      throw BackendError(BackendError::Kind::Auth, "backend '" + cfg.name +
                                                       "': environment variable " +
                                                       cfg.api_key_env + " is not set");
    }
    if (key) {
      if (anthropic) {
        http.headers.emplace_back("x-api-key", *key);
      } else {
        http.headers.emplace_back("Authorization", "Bearer " + *key);
      }
    }
    if (anthropic) http.headers.emplace_back("anthropic-version", "2023-06-01");
    http.body = anthropic ? anthropic_request_body(cfg, request.prompt)
                          : openai_request_body(cfg, request.prompt);

    const auto started = clock_->now();
    const int max_attempts = 1 + cfg.max_retries;
    BackendError last(BackendError::Kind::Timeout, "no attempt made");
    std::optional<std::chrono::milliseconds> retry_after;
    for (int attempt = 1; attempt <= max_attempts; ++attempt) {
      if (attempt > 1) clock_->sleep_for(backoff(attempt - 1, retry_after));
      retry_after.reset();
      limiter_.acquire();

      HttpResponse response;
      try {
        response = transport_->post(http);
      } catch (const TransportError& e) {
        last = BackendError(BackendError::Kind::Timeout,
                            "backend '" + cfg.name + "': " + e.what(), attempt);
        continue;
      }

      if (response.status >= 200 && response.status < 300) {
        auto [text, usage] =
            anthropic ? parse_anthropic_response(response.body) : parse_openai_response(response.body);
        CompletionResponse out;
        out.raw_text = std::move(text);
        out.usage = usage;
        out.estimated_cost = estimate_cost(cfg.prices, usage);
        out.latency =
            std::chrono::duration_cast<std::chrono::milliseconds>(clock_->now() - started);
        out.attempts = attempt;
        return out;
      }
      if (response.status == 401 || response.status == 403) {
        throw BackendError(BackendError::Kind::Auth,
                           "backend '" + cfg.name + "': HTTP " +
                               std::to_string(response.status) + " (credentials rejected)",
                           attempt);
      }
      const std::string status_text = "backend '" + cfg.name + "': HTTP " +
                                      std::to_string(response.status);
      if (!transient_status(response.status)) {
        throw BackendError(BackendError::Kind::UpstreamStatus, status_text, attempt);
      }
      if (response.status == 429) {
        last = BackendError(BackendError::Kind::RateLimited, status_text + " (rate limited)",
                            attempt);
        if (auto it = response.headers.find("retry-after"); it != response.headers.end()) {
          char* end = nullptr;
          const double seconds = std::strtod(it->second.c_str(), &end);
          if (end != it->second.c_str() && seconds >= 0 && seconds < 3600) {
            retry_after = std::chrono::milliseconds(static_cast<long long>(seconds * 1000));
          }
        }
      } else if (response.status == 408 || response.status == 504) {
        last = BackendError(BackendError::Kind::Timeout, status_text, attempt);
      } else {
        last = BackendError(BackendError::Kind::UpstreamStatus, status_text, attempt);
      }
    }
    throw BackendError(last.kind(),
                       std::string(last.what()) + " after " + std::to_string(max_attempts) +
                           " attempt(s)",
                       max_attempts);
  }

 private:
  Clock::Duration backoff(int retry, std::optional<std::chrono::milliseconds> retry_after) const {
    const auto& cfg = config();
    auto delay = cfg.retry_base_delay;
    for (int i = 1; i < retry && delay < cfg.retry_max_delay; ++i) delay *= 2;
    delay = std::min(delay, cfg.retry_max_delay);
    if (retry_after) delay = std::max(delay, std::min(*retry_after, cfg.retry_max_delay));
    return delay;
  }

  std::shared_ptr<HttpTransport> transport_;
  std::shared_ptr<Clock> clock_;
  std::function<std::optional<std::string>(const std::string&)> getenv_;
  RateLimiter limiter_;
};

class HeuristicBackend final : public Backend {
 public:
  using Backend::Backend;
  CompletionResponse complete(const CompletionRequest& request) override {
    return heuristic_complete(request);
  }
};

}  // namespace

std::unique_ptr<Backend> make_backend(const BackendConfig& config, BackendDeps deps) {
  config.validate();
  switch (config.kind) {
    case BackendKind::OpenAiCompatible:
    case BackendKind::AnthropicStyle:
    case BackendKind::LocalServer:
      return std::make_unique<RemoteBackend>(config, std::move(deps));
    case BackendKind::ScriptedMock:
      return scripted_backend(config, load_script(config.script_path));
    case BackendKind::HeuristicMock:
      return std::make_unique<HeuristicBackend>(config);
  }
  throw std::invalid_argument("unsupported backend kind");
}

CompletionResponse complete(const BackendConfig& config, const CompletionRequest& request,
                            BackendDeps deps) {
  return make_backend(config, std::move(deps))->complete(request);
}

}  // namespace phishintent

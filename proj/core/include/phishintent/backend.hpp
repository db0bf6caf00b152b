#pragma once

#include <chrono>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "phishintent/prompting.hpp"

namespace phishintent {

enum class BackendKind { OpenAiCompatible, AnthropicStyle, LocalServer, ScriptedMock, HeuristicMock };

std::string_view backend_kind_name(BackendKind kind) noexcept;
BackendKind parse_backend_kind(std::string_view text);
/// Remote kinds dispatch over HTTP and are rate limited and serialized per model.
bool is_remote(BackendKind kind) noexcept;

struct DecodeParams {
  double temperature = 0.0;
  int max_output_tokens = 1024;
};

/// USD per million tokens.
struct PriceTable {
  double input_per_mtok = 0.0;
  double output_per_mtok = 0.0;
};

struct BackendConfig {
  /// Label used in run records and reports; unique within a plan.
  std::string name;
  BackendKind kind = BackendKind::HeuristicMock;
  /// Full URL the request is POSTed to.
  std::string endpoint;
  std::string model_id;
  /// Name of the environment variable holding the key. Keys never live in config.
  std::string api_key_env;
  std::chrono::milliseconds timeout{60'000};
  int max_retries = 3;
  double requests_per_minute = 60.0;
  std::chrono::milliseconds retry_base_delay{500};
  std::chrono::milliseconds retry_max_delay{30'000};
  DecodeParams decode;
  std::optional<PriceTable> prices;
  /// Scripted mock only.
  std::filesystem::path script_path;
  std::optional<std::string> script_fallback;

  /// Throws std::invalid_argument describing the first broken invariant.
  void validate() const;
};

/// JSON: {"models": [ {"name": ..., "kind": ..., ...}, ... ]}. Relative
/// script paths resolve against the config file's directory.
std::vector<BackendConfig> parse_backend_configs(std::string_view json_text,
                                                 const std::filesystem::path& base_dir = {});
std::vector<BackendConfig> load_backend_configs(const std::filesystem::path& path);

/// Exactly one user turn. No conversation history is ever attached.
struct CompletionRequest {
  std::string prompt;
  std::string email_id;
  ExperimentKind kind = ExperimentKind::Exp1;
  ShotMode mode = ShotMode::Zero;

  static CompletionRequest from_bundle(const PromptBundle& bundle);
};

struct TokenUsage {
  long long input_tokens = 0;
  long long output_tokens = 0;
};

struct CompletionResponse {
  /// Verbatim model text; never trimmed.
  std::string raw_text;
  std::chrono::milliseconds latency{0};
  std::optional<TokenUsage> usage;
  std::optional<double> estimated_cost;
  int attempts = 1;
};

class BackendError : public std::runtime_error {
 public:
  enum class Kind {
    Auth,
    RateLimited,
    Timeout,
    MalformedUpstreamResponse,
    UpstreamStatus,
    MissingScriptEntry,
    InvalidRequest,
  };
  BackendError(Kind kind, const std::string& what, int attempts = 0)
      : std::runtime_error(what), kind_(kind), attempts_(attempts) {}
  Kind kind() const noexcept { return kind_; }
  int attempts() const noexcept { return attempts_; }

 private:
  Kind kind_;
  int attempts_;
};

std::string_view backend_error_name(BackendError::Kind kind) noexcept;

// ---- time ------------------------------------------------------------------

class Clock {
 public:
  using Duration = std::chrono::nanoseconds;
  using TimePoint = std::chrono::time_point<std::chrono::steady_clock, Duration>;

  virtual ~Clock() = default;
  virtual TimePoint now() = 0;
  virtual void sleep_for(Duration d) = 0;
};

class SteadyClock final : public Clock {
 public:
  TimePoint now() override { return std::chrono::steady_clock::now(); }
  void sleep_for(Duration d) override;
};

std::shared_ptr<Clock> system_clock();

/// Sliding 60-second window: at most `requests_per_minute` acquisitions in
/// any window. Blocks (on the clock) until a slot frees up. Thread-safe.
class RateLimiter {
 public:
  RateLimiter(double requests_per_minute, std::shared_ptr<Clock> clock);
  void acquire();

 private:
  std::size_t capacity_;
  std::shared_ptr<Clock> clock_;
  std::mutex mutex_;
  std::deque<Clock::TimePoint> window_;
};

// ---- HTTP ------------------------------------------------------------------

struct HttpRequest {
  std::string url;
  std::vector<std::pair<std::string, std::string>> headers;
  std::string body;
  std::chrono::milliseconds timeout{60'000};
};

struct HttpResponse {
  int status = 0;
  std::string body;
  std::map<std::string, std::string> headers;  // lower-cased names
};

/// Connection failures and timeouts.
class TransportError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class HttpTransport {
 public:
  virtual ~HttpTransport() = default;
  virtual HttpResponse post(const HttpRequest& request) = 0;
};

/// cpp-httplib client; https when built with OpenSSL.
std::shared_ptr<HttpTransport> default_transport();

// ---- backends --------------------------------------------------------------

class Backend {
 public:
  explicit Backend(BackendConfig config) : config_(std::move(config)) {}
  virtual ~Backend() = default;
  Backend(const Backend&) = delete;
  Backend& operator=(const Backend&) = delete;

  /// Safe to call concurrently. Requests are independent.
  virtual CompletionResponse complete(const CompletionRequest& request) = 0;

  const BackendConfig& config() const noexcept { return config_; }
  bool remote() const noexcept { return is_remote(config_.kind); }

 private:
  BackendConfig config_;
};

struct BackendDeps {
  std::shared_ptr<HttpTransport> transport;
  std::shared_ptr<Clock> clock;
  std::function<std::optional<std::string>(const std::string&)> getenv;
};

std::unique_ptr<Backend> make_backend(const BackendConfig& config, BackendDeps deps = {});

/// One-shot convenience over make_backend.
CompletionResponse complete(const BackendConfig& config, const CompletionRequest& request,
                            BackendDeps deps = {});

// ---- wire formats (exposed for tests) --------------------------------------

std::string openai_request_body(const BackendConfig& config, std::string_view prompt);
std::string anthropic_request_body(const BackendConfig& config, std::string_view prompt);
/// Throws BackendError(MalformedUpstreamResponse) when no completion text is present.
std::pair<std::string, std::optional<TokenUsage>> parse_openai_response(std::string_view body);
std::pair<std::string, std::optional<TokenUsage>> parse_anthropic_response(std::string_view body);

std::optional<double> estimate_cost(const std::optional<PriceTable>& prices,
                                    const std::optional<TokenUsage>& usage);

// ---- scripted mock ---------------------------------------------------------

/// Maps record ids to canned responses. A key of the form `<id>|Exp3-Zero`
/// overrides `<id>` for that single cell.
class ScriptTable {
 public:
  ScriptTable() = default;
  explicit ScriptTable(std::unordered_map<std::string, std::string> entries)
      : entries_(std::move(entries)) {}

  const std::string* find(const CompletionRequest& request) const;
  std::size_t size() const noexcept { return entries_.size(); }
  void set(std::string key, std::string response) {
    entries_[std::move(key)] = std::move(response);
  }
  const std::unordered_map<std::string, std::string>& entries() const noexcept {
    return entries_;
  }

 private:
  std::unordered_map<std::string, std::string> entries_;
};

class ScriptError : public std::runtime_error {
 public:
  ScriptError(std::size_t line, const std::string& what)
      : std::runtime_error(what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// `id<TAB>response` per line; the response escapes \n, \t, \r and \\.
ScriptTable parse_script(std::string_view text);
ScriptTable load_script(const std::filesystem::path& path);
std::string format_script(const ScriptTable& table);
std::string escape_script_text(std::string_view text);
std::string unescape_script_text(std::string_view text, std::size_t line = 0);

/// Scripted backend over a script file (see scripted_responses) or table.
std::unique_ptr<Backend> scripted_responses(const std::filesystem::path& path,
                                            std::optional<std::string> fallback = std::nullopt);
std::unique_ptr<Backend> scripted_backend(BackendConfig config, ScriptTable table);

// ---- heuristic mock --------------------------------------------------------

/// Keyword rules over the target email, always answered in the categorized
/// response format. Deterministic in the prompt text.
CompletionResponse heuristic_complete(const CompletionRequest& request);

}  // namespace phishintent

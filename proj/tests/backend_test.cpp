#include <doctest.h>

#include <httplib.h>

#include <json.hpp>
#include <thread>

#include "phishintent/backend.hpp"
#include "phishintent/parser.hpp"
#include "support.hpp"

using namespace phishintent;
using namespace std::chrono_literals;

namespace {

BackendConfig openai_config() {
  BackendConfig cfg;
  cfg.name = "gpt-test";
  cfg.kind = BackendKind::OpenAiCompatible;
  cfg.endpoint = "https://api.example.invalid/v1/chat/completions";
  cfg.model_id = "gpt-test-model";
  cfg.api_key_env = "TEST_KEY";
  cfg.requests_per_minute = 1000;
  return cfg;
}

CompletionRequest request_for(const std::string& id = "e1") {
  CompletionRequest r;
  r.prompt = "classify this";
  r.email_id = id;
  r.kind = ExperimentKind::Exp3;
  return r;
}

BackendError::Kind error_kind(const std::function<void()>& fn, int* attempts = nullptr) {
  try {
    fn();
  } catch (const BackendError& e) {
    if (attempts) *attempts = e.attempts();
    return e.kind();
  }
  FAIL("expected a BackendError");
  return BackendError::Kind::InvalidRequest;
}

}  // namespace

TEST_CASE("openai-compatible request and response") {
  auto clock = std::make_shared<testing::ManualClock>();
  auto transport = std::make_shared<testing::FakeTransport>(clock);
  transport->push(200, testing::openai_body("Phishing: NO\nJustification: fine", 1000, 500));
  auto cfg = openai_config();
  cfg.prices = PriceTable{2.0, 8.0};
  auto backend = make_backend(cfg, testing::fake_deps(transport, clock));

  const auto response = backend->complete(request_for());
  CHECK(response.raw_text == "Phishing: NO\nJustification: fine");
  REQUIRE(response.usage);
  CHECK(response.usage->input_tokens == 1000);
  CHECK(response.estimated_cost.value() == doctest::Approx(0.006));
  CHECK(response.attempts == 1);

  const auto sent = transport->requests().at(0);
  CHECK(sent.url == cfg.endpoint);
  bool bearer = false;
  for (const auto& [name, value] : sent.headers) bearer |= name == "Authorization" && value == "Bearer test-key";
  CHECK(bearer);
  const auto body = nlohmann::json::parse(sent.body);
  CHECK(body["model"] == "gpt-test-model");
  CHECK(body["messages"].size() == 1);
  CHECK(body["messages"][0]["role"] == "user");
  CHECK(body["messages"][0]["content"] == "classify this");
  CHECK(body["temperature"] == 0.0);
}

TEST_CASE("anthropic-style headers and response") {
  auto clock = std::make_shared<testing::ManualClock>();
  auto transport = std::make_shared<testing::FakeTransport>(clock);
  transport->push(200, R"({"content":[{"type":"text","text":"Phishing: "},{"type":"text","text":"YES"}],
                          "usage":{"input_tokens":3,"output_tokens":4}})");
  auto cfg = openai_config();
  cfg.kind = BackendKind::AnthropicStyle;
  auto backend = make_backend(cfg, testing::fake_deps(transport, clock));
  CHECK(backend->complete(request_for()).raw_text == "Phishing: YES");
  std::map<std::string, std::string> headers;
  const auto sent = transport->requests().at(0);
  for (const auto& [n, v] : sent.headers) headers[n] = v;
  CHECK(headers["x-api-key"] == "test-key");
  CHECK(headers.count("anthropic-version") == 1);
  CHECK(headers.count("Authorization") == 0);
}

TEST_CASE("missing or rejected credentials fail fast") {
  auto clock = std::make_shared<testing::ManualClock>();
  auto transport = std::make_shared<testing::FakeTransport>(clock);
  auto cfg = openai_config();
  {
    auto backend = make_backend(cfg, testing::fake_deps(transport, clock, std::nullopt));
    CHECK(error_kind([&] { backend->complete(request_for()); }) == BackendError::Kind::Auth);
    CHECK(transport->requests().empty());
  }
  transport->push(401, "{}");
  auto backend = make_backend(cfg, testing::fake_deps(transport, clock));
  int attempts = 0;
  CHECK(error_kind([&] { backend->complete(request_for()); }, &attempts) == BackendError::Kind::Auth);
  CHECK(attempts == 1);
  CHECK(clock->sleeps().empty());
}

TEST_CASE("transient failures retry with capped exponential backoff") {
  auto clock = std::make_shared<testing::ManualClock>();
  auto transport = std::make_shared<testing::FakeTransport>(clock);
  transport->push(503);
  transport->push_transport_error();
  transport->push(429, "", {{"retry-after", "7"}});
  transport->push(200, testing::openai_body("Phishing: NO\nJustification: ok"));
  auto cfg = openai_config();
  cfg.retry_base_delay = 100ms;
  cfg.retry_max_delay = 10s;
  auto backend = make_backend(cfg, testing::fake_deps(transport, clock));
  const auto response = backend->complete(request_for());
  CHECK(response.attempts == 4);
  const auto sleeps = clock->sleeps();
  REQUIRE(sleeps.size() == 3);
  CHECK(sleeps[0] == 100ms);
  CHECK(sleeps[1] == 200ms);
  CHECK(sleeps[2] == 7s);  // Retry-After wins over the 400 ms backoff
}

TEST_CASE("property: attempts never exceed max_retries + 1") {
  for (int retries = 0; retries <= 5; ++retries) {
    for (int status : {408, 429, 500, 502, 503, 504}) {
      auto clock = std::make_shared<testing::ManualClock>();
      auto transport = std::make_shared<testing::FakeTransport>(clock);
      transport->set_default(status, "");
      auto cfg = openai_config();
      cfg.max_retries = retries;
      auto backend = make_backend(cfg, testing::fake_deps(transport, clock));
      int attempts = 0;
      const auto kind = error_kind([&] { backend->complete(request_for()); }, &attempts);
      CHECK(attempts == retries + 1);
      CHECK(transport->requests().size() == static_cast<std::size_t>(retries + 1));
      if (status == 429) CHECK(kind == BackendError::Kind::RateLimited);
      if (status == 408 || status == 504) CHECK(kind == BackendError::Kind::Timeout);
    }
  }
}

TEST_CASE("non-transient statuses and malformed bodies are not retried") {
  auto clock = std::make_shared<testing::ManualClock>();
  auto transport = std::make_shared<testing::FakeTransport>(clock);
  transport->push(400, "{}");
  transport->push(200, "not json");
  transport->push(200, R"({"choices":[]})");
  auto backend = make_backend(openai_config(), testing::fake_deps(transport, clock));
  CHECK(error_kind([&] { backend->complete(request_for()); }) == BackendError::Kind::UpstreamStatus);
  CHECK(error_kind([&] { backend->complete(request_for()); }) ==
        BackendError::Kind::MalformedUpstreamResponse);
  CHECK(error_kind([&] { backend->complete(request_for()); }) ==
        BackendError::Kind::MalformedUpstreamResponse);
  CHECK(transport->requests().size() == 3);
}

TEST_CASE("property: the rate limiter never admits more than rpm per 60 s window") {
  for (double rpm : {1.0, 5.0, 30.0}) {
    auto clock = std::make_shared<testing::ManualClock>();
    auto transport = std::make_shared<testing::FakeTransport>(clock);
    transport->set_default(200, testing::openai_body("Phishing: NO\nJustification: ok"));
    auto cfg = openai_config();
    cfg.requests_per_minute = rpm;
    auto backend = make_backend(cfg, testing::fake_deps(transport, clock));
    for (int i = 0; i < 40; ++i) backend->complete(request_for());
    const auto times = transport->request_times();
    for (std::size_t i = 0; i < times.size(); ++i) {
      std::size_t in_window = 0;
      for (std::size_t j = i; j < times.size() && times[j] < times[i] + 60s; ++j) ++in_window;
      CHECK(in_window <= static_cast<std::size_t>(rpm));
    }
  }
}

TEST_CASE("an unreachable local endpoint is a timeout") {
  auto cfg = openai_config();
  cfg.kind = BackendKind::LocalServer;
  cfg.endpoint = "http://127.0.0.1:1/v1/chat/completions";
  cfg.api_key_env.clear();
  cfg.max_retries = 0;
  cfg.timeout = 2s;
  int attempts = 0;
  CHECK(error_kind([&] { complete(cfg, request_for()); }, &attempts) == BackendError::Kind::Timeout);
  CHECK(attempts == 1);
}

TEST_CASE("real HTTP round trip against a local server") {
  httplib::Server server;
  std::string seen_body;
  std::string seen_auth;
  server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
    seen_body = req.body;
    seen_auth = req.get_header_value("Authorization");
    res.set_content(testing::openai_body("Phishing: YES\nCategory: Other\nJustification: odd"),
                    "application/json");
  });
  const int port = server.bind_to_any_port("127.0.0.1");
  REQUIRE(port > 0);
  std::thread thread([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  auto cfg = openai_config();
  cfg.kind = BackendKind::LocalServer;
  cfg.endpoint = "http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions";
  cfg.api_key_env = "LOCAL_KEY";
  BackendDeps deps;
  deps.getenv = [](const std::string&) { return std::optional<std::string>("local-secret"); };
  const auto response = complete(cfg, request_for(), deps);
  server.stop();
  thread.join();

  CHECK(response.raw_text == "Phishing: YES\nCategory: Other\nJustification: odd");
  CHECK(seen_auth == "Bearer local-secret");
  CHECK(nlohmann::json::parse(seen_body)["messages"][0]["content"] == "classify this");
}

TEST_CASE("backend configs come from JSON without secrets") {
  const auto configs = parse_backend_configs(R"({"models":[
      {"name":"a","kind":"openai_compatible","endpoint":"https://x.invalid/v1/chat/completions",
       "api_key_env":"A_KEY","requests_per_minute":10,"input_usd_per_mtok":1.5,"output_usd_per_mtok":2},
      {"name":"h","kind":"heuristic_mock"}]})");
  REQUIRE(configs.size() == 2);
  CHECK(configs[0].model_id == "a");
  CHECK(configs[0].requests_per_minute == 10);
  CHECK(configs[0].prices->input_per_mtok == 1.5);
  CHECK_FALSE(is_remote(configs[1].kind));
  CHECK_THROWS(parse_backend_configs(R"({"models":[{"name":"a","kind":"openai_compatible",
      "endpoint":"https://x.invalid","api_key":"sk-123"}]})"));
  CHECK_THROWS(parse_backend_configs(R"({"models":[{"name":"a","kind":"heuristic_mock"},
      {"name":"a","kind":"heuristic_mock"}]})"));
  CHECK_THROWS(parse_backend_configs(R"({"models":[{"name":"a","kind":"heuristic_mock","colour":1}]})"));
  const auto example = load_backend_configs(testing::data_dir() / "models" / "openai_example.json");
  CHECK(example.size() == 3);
}

TEST_CASE("scripts: escapes, overrides and missing entries") {
  const std::string text = "e1\tPhishing: NO\\nJustification: a\\tb \\\\ c\n"
                           "e1|Exp1-Zero\tPhishing: YES\\nJustification: override\n";
  const auto table = parse_script(text);
  auto req = request_for("e1");
  CHECK(*table.find(req) == "Phishing: NO\nJustification: a\tb \\ c");
  req.kind = ExperimentKind::Exp1;
  CHECK(*table.find(req) == "Phishing: YES\nJustification: override");
  CHECK(table.find(request_for("e2")) == nullptr);
  CHECK(parse_script(format_script(table)).entries() == table.entries());
  CHECK_THROWS_AS(parse_script("e1 no tab\n"), ScriptError);
  CHECK_THROWS_AS(parse_script("e1\ta\ne1\tb\n"), ScriptError);
  CHECK_THROWS_AS(parse_script("e1\tbad \\q escape\n"), ScriptError);

  BackendConfig cfg;
  cfg.name = "s";
  cfg.kind = BackendKind::ScriptedMock;
  auto backend = scripted_backend(cfg, table);
  CHECK(error_kind([&] { backend->complete(request_for("zzz")); }) ==
        BackendError::Kind::MissingScriptEntry);
  CHECK(escape_script_text(unescape_script_text("x\\ny")) == "x\\ny");
}

TEST_CASE("heuristic mock reads the target email and answers in format") {
  CompletionRequest req;
  req.kind = ExperimentKind::Exp3;
  req.prompt = "preamble mentioning password and http://decoy\n\nEmail:\nSubject: Hi\nBody: Lunch at noon?\n";
  auto benign = heuristic_complete(req);
  CHECK(benign.raw_text.starts_with("Phishing: NO\n"));

  req.prompt = "\nEmail:\nSubject: Urgent\nBody: Your account is suspended, click here: http://x\n";
  const auto link = parse_response(heuristic_complete(req).raw_text, ExperimentKind::Exp3);
  REQUIRE(is_parsed(link));
  CHECK(std::get<ParsedVerdict>(link).category == IntentCategory::Link);

  req.prompt = "\nEmail:\nSubject: Urgent\nBody: Buy a gift card and call me at 555-0100\n";
  const auto service = parse_response(heuristic_complete(req).raw_text, ExperimentKind::Exp3);
  REQUIRE(is_parsed(service));
  CHECK(std::get<ParsedVerdict>(service).category == IntentCategory::Service);
  CHECK(heuristic_complete(req).raw_text == heuristic_complete(req).raw_text);
}

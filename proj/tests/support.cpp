#include "support.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "phishintent/parser.hpp"
#include "phishintent/run_log.hpp"

namespace testing {

using namespace phishintent;

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
}

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  std::random_device rd;
  path_ = std::filesystem::temp_directory_path() /
          ("phishintent-" + tag + "-" + std::to_string(rd()) + "-" +
           std::to_string(counter.fetch_add(1)));
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

ManualClock::TimePoint ManualClock::now() {
  std::lock_guard lock(mutex_);
  return now_;
}

void ManualClock::sleep_for(Duration d) {
  std::lock_guard lock(mutex_);
  sleeps_.push_back(d);
  now_ += d;
}

std::vector<ManualClock::Duration> ManualClock::sleeps() const {
  std::lock_guard lock(mutex_);
  return sleeps_;
}

void FakeTransport::push(int status, std::string body,
                         std::map<std::string, std::string> headers) {
  std::lock_guard lock(mutex_);
  steps_.push_back({HttpResponse{status, std::move(body), std::move(headers)}, false});
}

void FakeTransport::push_transport_error() {
  std::lock_guard lock(mutex_);
  steps_.push_back({{}, true});
}

void FakeTransport::set_default(int status, std::string body) {
  std::lock_guard lock(mutex_);
  default_ = Step{HttpResponse{status, std::move(body), {}}, false};
}

HttpResponse FakeTransport::post(const HttpRequest& request) {
  std::lock_guard lock(mutex_);
  requests_.push_back(request);
  times_.push_back(clock_ ? clock_->now() : Clock::TimePoint{});
  Step step;
  if (!steps_.empty()) {
    step = steps_.front();
    steps_.pop_front();
  } else if (default_) {
    step = *default_;
  } else {
    throw std::logic_error("FakeTransport: no response queued");
  }
  if (step.throw_transport) throw TransportError("connection refused");
  return step.response;
}

std::vector<HttpRequest> FakeTransport::requests() const {
  std::lock_guard lock(mutex_);
  return requests_;
}

std::vector<Clock::TimePoint> FakeTransport::request_times() const {
  std::lock_guard lock(mutex_);
  return times_;
}

std::string openai_body(const std::string& content, int prompt_tokens, int completion_tokens) {
  nlohmann::json j = {
      {"choices", {{{"index", 0}, {"message", {{"role", "assistant"}, {"content", content}}}}}},
      {"usage", {{"prompt_tokens", prompt_tokens}, {"completion_tokens", completion_tokens}}}};
  return j.dump();
}

BackendDeps fake_deps(std::shared_ptr<HttpTransport> transport, std::shared_ptr<Clock> clock,
                      std::optional<std::string> key) {
  BackendDeps deps;
  deps.transport = std::move(transport);
  deps.clock = std::move(clock);
  deps.getenv = [key](const std::string&) { return key; };
  return deps;
}

std::vector<EmailRecord> random_truth(std::mt19937_64& rng, std::size_t n) {
  std::vector<EmailRecord> out;
  std::uniform_int_distribution<int> coin(0, 99);
  std::uniform_int_distribution<int> intent(0, 3);
  for (std::size_t i = 0; i < n; ++i) {
    EmailRecord r;
    r.id = "e" + std::to_string(i);
    r.subject = "s" + std::to_string(i);
    r.body = "b" + std::to_string(i);
    if (coin(rng) < 45) {
      r.label = Label::Phishing;
      // A few phishing emails stay uncategorized.
      if (coin(rng) >= 8) r.intent = kAllCategories[intent(rng)];
    }
    out.push_back(std::move(r));
  }
  return out;
}

namespace {

std::string strict_text(bool yes, std::optional<IntentCategory> category, bool with_category_line) {
  std::string text = yes ? "Phishing: YES\n" : "Phishing: NO\n";
  if (with_category_line && yes && category) {
    text += "Category: " + std::string(canonical_name(*category)) + "\n";
  }
  text += "Justification: synthetic answer";
  return text;
}

}  // namespace

std::vector<RunRecord> random_runs(std::mt19937_64& rng, const std::vector<EmailRecord>& truth,
                                   ExperimentKind kind, const std::string& model) {
  std::vector<RunRecord> out;
  std::uniform_int_distribution<int> pick(0, 99);
  std::uniform_int_distribution<int> intent(0, 3);
  const bool categorized = kind == ExperimentKind::Exp3;
  for (const auto& email : truth) {
    RunRecord run;
    run.email_id = email.id;
    run.model_id = model;
    run.kind = kind;
    const int roll = pick(rng);
    if (roll < 8) {
      run.raw_response = "I cannot help with that.";
    } else if (roll < 12) {
      run.backend_error = "TimeoutError: synthetic";
    } else {
      bool yes = email.is_phishing();
      if (roll < 27) yes = !yes;
      std::optional<IntentCategory> category;
      if (yes) {
        category = email.intent.value_or(kAllCategories[intent(rng)]);
        if (pick(rng) < 20) category = kAllCategories[intent(rng)];
      }
      run.raw_response = strict_text(yes, category, categorized);
    }
    run.outcome = run.backend_error ? ParseOutcome{ParseFailure{}}
                                    : parse_response(run.raw_response, kind);
    out.push_back(std::move(run));
  }
  return out;
}

std::string random_text(std::mt19937_64& rng, std::size_t max_len) {
  static const std::vector<std::string> pieces = {
      "Phishing", "phishing:", "YES", "NO", "yes", "no", "Category:", "Justification:",
      "Phishing via Link", "Other", "**", "- ", "\n", "\r\n", " ", ":", "1.", "#", "\t",
      "\xC3\xA9", "\xFF", "\x00", "|", "`", "Yes/No", "YES/NO", "Phishing via"};
  std::uniform_int_distribution<std::size_t> len(0, max_len);
  std::uniform_int_distribution<int> mode(0, 2);
  std::uniform_int_distribution<std::size_t> piece(0, pieces.size() - 1);
  std::uniform_int_distribution<int> byte(0, 255);
  std::string out;
  const std::size_t n = len(rng);
  while (out.size() < n) {
    if (mode(rng) == 0) {
      out.push_back(static_cast<char>(byte(rng)));
    } else {
      out += pieces[piece(rng)];
    }
  }
  return out;
}

OracleCounts oracle_recount(const std::vector<RunRecord>& runs,
                            const std::vector<EmailRecord>& truth) {
  OracleCounts counts;
  counts.total = truth.size();
  for (const auto& email : truth) {
    if (email.is_phishing() && email.intent) ++counts.categorized_phishing;
  }
  for (const auto& run : runs) {
    const EmailRecord* email = nullptr;
    for (const auto& e : truth) {
      if (e.id == run.email_id) email = &e;
    }
    if (!email || run.backend_error) continue;
    const std::string& raw = run.raw_response;
    int verdict = -1;
    if (raw.rfind("Phishing: YES\n", 0) == 0) verdict = 1;
    if (raw.rfind("Phishing: NO\n", 0) == 0) verdict = 0;
    if (verdict < 0) continue;
    std::string category;
    const auto at = raw.find("\nCategory: ");
    if (at != std::string::npos) {
      const auto start = at + 11;
      category = raw.substr(start, raw.find('\n', start) - start);
    }
    const bool categorized_kind = run.kind == ExperimentKind::Exp3;
    // A YES without a category cannot be scored in the categorized experiment.
    if (categorized_kind && verdict == 1 && category.empty()) continue;
    if ((verdict == 1) == email->is_phishing()) ++counts.detection_correct;
    if (categorized_kind && verdict == 1 && email->is_phishing() && email->intent &&
        category == canonical_name(*email->intent)) {
      ++counts.category_correct;
    }
  }
  return counts;
}

std::string canonical_line(const RunRecord& record) {
  RunRecord copy = record;
  copy.latency = std::chrono::milliseconds(0);
  copy.timestamp.clear();
  return encode_run_record(copy);
}

std::vector<std::string> canonical_log(const std::vector<RunRecord>& records) {
  std::vector<std::string> lines;
  for (const auto& r : records) lines.push_back(canonical_line(r));
  std::sort(lines.begin(), lines.end());
  return lines;
}

}  // namespace testing

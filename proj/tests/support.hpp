#pragma once

#include <cstdint>
#include <atomic>
#include <deque>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "phishintent/backend.hpp"
#include "phishintent/dataset.hpp"
#include "phishintent/evaluation.hpp"

namespace testing {

inline std::filesystem::path data_dir() { return PHISHINTENT_DATA_DIR; }
inline std::filesystem::path golden_dir() { return PHISHINTENT_GOLDEN_DIR; }
inline std::filesystem::path fixture_dataset() {
  return data_dir() / "fixtures" / "validation_100.csv";
}
inline std::filesystem::path shot_library() { return data_dir() / "fewshot" / "examples.csv"; }

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& text);

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

/// Time only moves when someone sleeps.
class ManualClock final : public phishintent::Clock {
 public:
  TimePoint now() override;
  void sleep_for(Duration d) override;
  std::vector<Duration> sleeps() const;

 private:
  mutable std::mutex mutex_;
  TimePoint now_{};
  std::vector<Duration> sleeps_;
};

/// Replays canned responses in order; `throw_transport` entries raise
/// TransportError. Records every request together with the clock reading.
class FakeTransport final : public phishintent::HttpTransport {
 public:
  struct Step {
    phishintent::HttpResponse response;
    bool throw_transport = false;
  };

  explicit FakeTransport(std::shared_ptr<phishintent::Clock> clock = nullptr)
      : clock_(std::move(clock)) {}

  void push(int status, std::string body = {},
            std::map<std::string, std::string> headers = {});
  void push_transport_error();
  /// Answer every request not covered by a queued step.
  void set_default(int status, std::string body);

  phishintent::HttpResponse post(const phishintent::HttpRequest& request) override;

  std::vector<phishintent::HttpRequest> requests() const;
  std::vector<phishintent::Clock::TimePoint> request_times() const;

 private:
  mutable std::mutex mutex_;
  std::shared_ptr<phishintent::Clock> clock_;
  std::deque<Step> steps_;
  std::optional<Step> default_;
  std::vector<phishintent::HttpRequest> requests_;
  std::vector<phishintent::Clock::TimePoint> times_;
};

std::string openai_body(const std::string& content, int prompt_tokens = 10,
                        int completion_tokens = 5);

phishintent::BackendDeps fake_deps(std::shared_ptr<phishintent::HttpTransport> transport,
                                   std::shared_ptr<phishintent::Clock> clock,
                                   std::optional<std::string> key = "test-key");

// ---- synthetic data --------------------------------------------------------

/// n emails with random labels; phishing ones get a random intent.
std::vector<phishintent::EmailRecord> random_truth(std::mt19937_64& rng, std::size_t n);

/// One run per email: a random mix of correct answers, wrong verdicts, wrong
/// categories, parse failures and backend failures.
std::vector<phishintent::RunRecord> random_runs(std::mt19937_64& rng,
                                                const std::vector<phishintent::EmailRecord>& truth,
                                                phishintent::ExperimentKind kind,
                                                const std::string& model = "m");

/// Printable ASCII plus the characters the parser cares about.
std::string random_text(std::mt19937_64& rng, std::size_t max_len);

/// Brute-force recount kept deliberately separate from the evaluation module:
/// it works from the rendered raw text, not from the stored outcome.
struct OracleCounts {
  std::size_t detection_correct = 0;
  std::size_t category_correct = 0;
  std::size_t categorized_phishing = 0;
  std::size_t total = 0;
};
OracleCounts oracle_recount(const std::vector<phishintent::RunRecord>& runs,
                            const std::vector<phishintent::EmailRecord>& truth);

/// Canonical fields of a run record: everything except latency and timestamp.
std::string canonical_line(const phishintent::RunRecord& record);
std::vector<std::string> canonical_log(const std::vector<phishintent::RunRecord>& records);

}  // namespace testing

#pragma once

#include <array>
#include <chrono>
#include <compare>
#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include "phishintent/dataset.hpp"
#include "phishintent/parser.hpp"
#include "phishintent/prompting.hpp"

namespace phishintent {

/// An exact fraction. Percentages are rendered from the integers, so
/// half-up rounding never depends on floating-point representation.
struct Ratio {
  std::size_t numerator = 0;
  std::size_t denominator = 0;

  double value() const noexcept {
    return denominator ? static_cast<double>(numerator) / static_cast<double>(denominator) : 0.0;
  }
  friend bool operator==(const Ratio&, const Ratio&) = default;
};

/// Two decimals, round half up: 37/43 -> "86.05%". An empty denominator renders "n/a".
std::string format_percent(Ratio ratio);
/// Same rounding for a ratio already in [0, 1]; for display only.
std::string format_percent(double ratio);

struct CellKey {
  std::string email_id;
  std::string model_id;
  ExperimentKind kind = ExperimentKind::Exp1;
  ShotMode mode = ShotMode::Zero;

  friend auto operator<=>(const CellKey&, const CellKey&) = default;
  friend bool operator==(const CellKey&, const CellKey&) = default;
};

struct GroupKey {
  std::string model_id;
  ExperimentKind kind = ExperimentKind::Exp1;
  ShotMode mode = ShotMode::Zero;

  friend auto operator<=>(const GroupKey&, const GroupKey&) = default;
  friend bool operator==(const GroupKey&, const GroupKey&) = default;
};

struct RunRecord {
  std::string email_id;
  std::string model_id;
  ExperimentKind kind = ExperimentKind::Exp1;
  ShotMode mode = ShotMode::Zero;
  /// SHA-256 hex of the prompt text.
  std::string prompt_hash;
  std::string raw_response;
  /// Backend failures carry a MissingVerdict failure here plus backend_error.
  ParseOutcome outcome = ParseFailure{};
  std::optional<std::string> backend_error;
  std::chrono::milliseconds latency{0};
  std::optional<double> cost;
  /// ISO-8601 UTC.
  std::string timestamp;

  CellKey cell() const { return {email_id, model_id, kind, mode}; }
  GroupKey group() const { return {model_id, kind, mode}; }
};

class ScoringError : public std::runtime_error {
 public:
  enum class Kind { MissingRun, DuplicateRun, UnknownEmail };
  ScoringError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Correct verdicts over all truth emails; parse failures are wrong answers.
/// `runs` must hold exactly one record per truth email.
Ratio detection_accuracy(const std::vector<RunRecord>& runs,
                         const std::vector<EmailRecord>& truth);

/// Numerator: phishing emails answered YES with the true intent.
/// Denominator: categorized phishing emails in the truth set.
Ratio category_accuracy(const std::vector<RunRecord>& runs, const std::vector<EmailRecord>& truth);

struct DetectionConfusion {
  // Parse failures land in false_negative / false_positive and are also
  // counted in the unparsed_* fields.
  std::size_t true_positive = 0;
  std::size_t false_negative = 0;
  std::size_t false_positive = 0;
  std::size_t true_negative = 0;
  std::size_t unparsed_phishing = 0;
  std::size_t unparsed_legitimate = 0;

  std::size_t total() const noexcept {
    return true_positive + false_negative + false_positive + true_negative;
  }
  friend bool operator==(const DetectionConfusion&, const DetectionConfusion&) = default;
};

/// Rows: true intent. Columns: the four predicted intents, then Missed
/// (answered NO, or YES without a category), then Unparsed.
struct CategoryConfusion {
  static constexpr std::size_t kMissed = 4;
  static constexpr std::size_t kUnparsed = 5;
  std::array<std::array<std::size_t, 6>, 4> counts{};

  std::size_t& at(IntentCategory truth, std::size_t column) {
    return counts[static_cast<std::size_t>(truth)][column];
  }
  std::size_t at(IntentCategory truth, std::size_t column) const {
    return counts[static_cast<std::size_t>(truth)][column];
  }
  std::size_t total() const noexcept;
  friend bool operator==(const CategoryConfusion&, const CategoryConfusion&) = default;
};

struct Confusion {
  DetectionConfusion detection;
  CategoryConfusion category;
};

Confusion confusion(const std::vector<RunRecord>& runs, const std::vector<EmailRecord>& truth);

/// Parsed runs without EmptyJustification over all parsed runs.
Ratio justification_coverage(const std::vector<RunRecord>& runs);

struct CostTotal {
  double amount = 0.0;
  std::size_t priced = 0;
  std::size_t unpriced = 0;

  /// No priced run at all: cost is unknown, not zero.
  bool available() const noexcept { return priced > 0; }
  bool complete() const noexcept { return priced > 0 && unpriced == 0; }
};

struct CostLatency {
  std::size_t runs = 0;
  std::chrono::milliseconds latency{0};
  CostTotal cost;
};

struct CostLatencySummary {
  std::map<GroupKey, CostLatency> per_group;
  CostLatency overall;
};

CostLatencySummary cost_latency_summary(const std::vector<RunRecord>& runs);
/// "12.40 USD", "3.10 USD (incomplete: 2 unpriced)", or "unavailable".
std::string format_cost(const CostTotal& cost);

struct MetricsReport {
  GroupKey key;
  std::size_t total = 0;
  Ratio detection;
  /// Exp3 only.
  std::optional<Ratio> category;
  DetectionConfusion detection_confusion;
  CategoryConfusion category_confusion;
  Ratio justification_coverage;
  Ratio parse_failure_rate;
  std::size_t lenient_matches = 0;
  std::size_t backend_failures = 0;
  CostLatency cost_latency;
};

/// One report per (model, experiment, mode) group present in `runs`; each
/// group must cover every truth email exactly once.
std::vector<MetricsReport> evaluate(const std::vector<RunRecord>& runs,
                                    const std::vector<EmailRecord>& truth);

/// "94.00% / 86.05%" when a category ratio is given, else "2.00%".
std::string format_cell(Ratio detection, const std::optional<Ratio>& category);

/// Models as rows, "Exp1-Zero" .. "Exp3-Few" as columns (only those present).
std::string render_report(const std::vector<MetricsReport>& reports);

/// Full-precision export: ratios as numerator/denominator/value plus both
/// confusion matrices and cost/latency totals.
std::string export_metrics_json(const std::vector<MetricsReport>& reports);
std::vector<MetricsReport> import_metrics_json(std::string_view json_text);

}  // namespace phishintent

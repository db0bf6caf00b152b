#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "phishintent/taxonomy.hpp"

namespace phishintent {

enum class Label { Legitimate, Phishing };

struct EmailRecord {
  std::string id;
  std::string subject;
  std::string body;
  Label label = Label::Legitimate;
  /// Present iff label is Phishing and the record has been categorized.
  std::optional<IntentCategory> intent;
  std::string source;

  bool is_phishing() const noexcept { return label == Label::Phishing; }
  friend bool operator==(const EmailRecord&, const EmailRecord&) = default;
};

enum class DatasetFormat {
  /// Header `id,subject,body,label,category`.
  Canonical,
  /// Header `subject,body,label` (Kaggle-style exports); ids are assigned
  /// from the source name and row number.
  SubjectBodyLabel,
};

DatasetFormat parse_dataset_format(std::string_view tag);

class DatasetError : public std::runtime_error {
 public:
  enum class Kind { Io, MalformedRow, UnknownLabel, UnknownCategory };

  DatasetError(Kind kind, std::size_t row, const std::string& cause);

  Kind kind() const noexcept { return kind_; }
  /// 1-based record index including the header row; 0 for file-level errors.
  std::size_t row() const noexcept { return row_; }

 private:
  Kind kind_;
  std::size_t row_;
};

std::vector<EmailRecord> parse_dataset(std::string_view text, DatasetFormat format,
                                       std::string_view source = {});
std::vector<EmailRecord> load_dataset(const std::filesystem::path& path,
                                      DatasetFormat format = DatasetFormat::Canonical);

/// Writes the canonical format. Reloading the output yields equal records
/// (source aside, which is taken from the file name on load).
void write_dataset(const std::filesystem::path& path, const std::vector<EmailRecord>& records);
std::string format_dataset(const std::vector<EmailRecord>& records);

struct BiasFilterResult {
  std::vector<EmailRecord> kept;
  std::vector<EmailRecord> removed;
};

inline const std::vector<std::string> kDefaultDenyTerms = {"enron"};

/// Case-insensitive substring match of each deny term over subject + body.
/// Throws std::invalid_argument when deny_terms is empty.
BiasFilterResult filter_bias(const std::vector<EmailRecord>& records,
                             const std::vector<std::string>& deny_terms);

struct DatasetSummary {
  std::size_t total = 0;
  std::size_t phishing = 0;
  std::size_t legitimate = 0;
  /// Indexed by IntentCategory.
  std::array<std::size_t, 4> per_category{};
  std::size_t uncategorized_phishing = 0;
  std::size_t removed_by_filter = 0;

  std::size_t count(IntentCategory category) const {
    return per_category[static_cast<std::size_t>(category)];
  }
};

struct Violation {
  enum class Kind { DuplicateId, IntentOnLegitimate, PhishingWithoutIntent };
  Kind kind;
  std::string record_id;
  std::string message;
};

struct ValidationReport {
  DatasetSummary summary;
  /// Invariant breaches; the dataset is unusable while any exist.
  std::vector<Violation> violations;
  /// Phishing records without an intent. Fine for binary-only experiments.
  std::vector<Violation> warnings;

  bool ok() const noexcept { return violations.empty(); }
};

DatasetSummary summarize(const std::vector<EmailRecord>& records,
                         std::size_t removed_by_filter = 0);
ValidationReport validate_dataset(const std::vector<EmailRecord>& records);

/// Deterministic subset of size n for a fixed seed, returned in input order.
/// Throws std::invalid_argument when n exceeds records.size().
std::vector<EmailRecord> select_validation_set(const std::vector<EmailRecord>& records,
                                               std::size_t n, std::uint64_t seed);

std::string_view label_name(Label label) noexcept;

}  // namespace phishintent

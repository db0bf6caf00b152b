#include "phishintent/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

#include "phishintent/csv.hpp"

namespace phishintent {

namespace {

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string trim_copy(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

bool is_blank_row(const csv::Row& row) { return row.size() == 1 && row[0].empty(); }

Label decode_label(std::string_view raw, std::size_t row) {
  const std::string value = trim_copy(raw);
  if (value == "1") return Label::Phishing;
  if (value == "0") return Label::Legitimate;
  throw DatasetError(DatasetError::Kind::UnknownLabel, row,
                     "unknown label value '" + value + "' (expected 0 or 1)");
}

struct ColumnMap {
  std::optional<std::size_t> id, subject, body, label, category;
};

ColumnMap map_header(const csv::Row& header, DatasetFormat format) {
  ColumnMap map;
  for (std::size_t i = 0; i < header.size(); ++i) {
    const std::string name = lowercase(trim_copy(header[i]));
    if (name == "id") map.id = i;
    else if (name == "subject") map.subject = i;
    else if (name == "body") map.body = i;
    else if (name == "label") map.label = i;
    else if (name == "category") map.category = i;
  }
  auto require = [&](const std::optional<std::size_t>& col, const char* name) {
    if (!col) {
      throw DatasetError(DatasetError::Kind::MalformedRow, 1,
                         std::string("header is missing required column '") + name + "'");
    }
  };
  if (format == DatasetFormat::Canonical) {
    require(map.id, "id");
    require(map.category, "category");
  }
  require(map.subject, "subject");
  require(map.body, "body");
  require(map.label, "label");
  return map;
}

}  // namespace

DatasetError::DatasetError(Kind kind, std::size_t row, const std::string& cause)
    : std::runtime_error(row ? "row " + std::to_string(row) + ": " + cause : cause),
      kind_(kind),
      row_(row) {}

DatasetFormat parse_dataset_format(std::string_view tag) {
  const std::string key = lowercase(tag);
  if (key == "canonical") return DatasetFormat::Canonical;
  if (key == "subject-body-label" || key == "kaggle") return DatasetFormat::SubjectBodyLabel;
  throw std::invalid_argument("unknown dataset format '" + std::string(tag) + "'");
}

std::string_view label_name(Label label) noexcept {
  return label == Label::Phishing ? "phishing" : "legitimate";
}

std::vector<EmailRecord> parse_dataset(std::string_view text, DatasetFormat format,
                                       std::string_view source) {
  std::vector<csv::Row> rows;
  try {
    rows = csv::parse(text);
  } catch (const csv::CsvError& e) {
    throw DatasetError(DatasetError::Kind::MalformedRow, e.record(), e.what());
  }
  if (rows.empty()) {
    throw DatasetError(DatasetError::Kind::MalformedRow, 0, "dataset has no header row");
  }

  const ColumnMap columns = map_header(rows.front(), format);
  const std::size_t width = rows.front().size();

  std::vector<EmailRecord> records;
  records.reserve(rows.size() - 1);
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const csv::Row& row = rows[r];
    const std::size_t row_number = r + 1;
    if (is_blank_row(row)) continue;
    if (row.size() != width) {
      throw DatasetError(DatasetError::Kind::MalformedRow, row_number,
                         "expected " + std::to_string(width) + " fields, found " +
                             std::to_string(row.size()));
    }

    EmailRecord record;
    record.source = std::string(source);
    record.subject = row[*columns.subject];
    record.body = row[*columns.body];
    record.label = decode_label(row[*columns.label], row_number);
    if (columns.id) {
      record.id = trim_copy(row[*columns.id]);
      if (record.id.empty()) {
        throw DatasetError(DatasetError::Kind::MalformedRow, row_number, "empty id");
      }
    } else {
      record.id = (source.empty() ? std::string("row") : std::string(source)) + "-" +
                  std::to_string(row_number);
    }
    if (columns.category) {
      const std::string category = trim_copy(row[*columns.category]);
      if (!category.empty()) {
        const auto parsed = try_parse_category(category);
        if (!parsed) {
          throw DatasetError(DatasetError::Kind::UnknownCategory, row_number,
                             "unknown category '" + category + "'");
        }
        if (record.label == Label::Legitimate) {
          throw DatasetError(DatasetError::Kind::MalformedRow, row_number,
                             "legitimate record carries category '" + category + "'");
        }
        record.intent = parsed;
      }
    }
    records.push_back(std::move(record));
  }
  return records;
}

std::vector<EmailRecord> load_dataset(const std::filesystem::path& path, DatasetFormat format) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw DatasetError(DatasetError::Kind::Io, 0, "cannot open dataset '" + path.string() + "'");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_dataset(buffer.str(), format, path.stem().string());
}

std::string format_dataset(const std::vector<EmailRecord>& records) {
  std::ostringstream out;
  csv::write_row(out, {"id", "subject", "body", "label", "category"});
  for (const auto& record : records) {
    csv::write_row(out, {record.id, record.subject, record.body,
                         record.is_phishing() ? "1" : "0",
                         record.intent ? std::string(canonical_name(*record.intent)) : ""});
  }
  return out.str();
}

void write_dataset(const std::filesystem::path& path, const std::vector<EmailRecord>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw DatasetError(DatasetError::Kind::Io, 0, "cannot write dataset '" + path.string() + "'");
  }
  out << format_dataset(records);
  if (!out.flush()) {
    throw DatasetError(DatasetError::Kind::Io, 0, "write failed for '" + path.string() + "'");
  }
}

BiasFilterResult filter_bias(const std::vector<EmailRecord>& records,
                             const std::vector<std::string>& deny_terms) {
  if (deny_terms.empty()) throw std::invalid_argument("filter_bias: deny_terms is empty");

  std::vector<std::string> needles;
  for (const auto& term : deny_terms) {
    if (!term.empty()) needles.push_back(lowercase(term));
  }
  if (needles.empty()) throw std::invalid_argument("filter_bias: all deny terms are empty");

  BiasFilterResult result;
  for (const auto& record : records) {
    const std::string haystack = lowercase(record.subject) + "\n" + lowercase(record.body);
    const bool hit = std::any_of(needles.begin(), needles.end(), [&](const std::string& n) {
      return haystack.find(n) != std::string::npos;
    });
    (hit ? result.removed : result.kept).push_back(record);
  }
  return result;
}

DatasetSummary summarize(const std::vector<EmailRecord>& records, std::size_t removed_by_filter) {
  DatasetSummary summary;
  summary.total = records.size();
  summary.removed_by_filter = removed_by_filter;
  for (const auto& record : records) {
    if (!record.is_phishing()) {
      ++summary.legitimate;
      continue;
    }
    ++summary.phishing;
    if (record.intent) {
      ++summary.per_category[static_cast<std::size_t>(*record.intent)];
    } else {
      ++summary.uncategorized_phishing;
    }
  }
  return summary;
}

ValidationReport validate_dataset(const std::vector<EmailRecord>& records) {
  ValidationReport report;
  report.summary = summarize(records);

  std::unordered_set<std::string> seen;
  for (const auto& record : records) {
    if (!seen.insert(record.id).second) {
      report.violations.push_back(
          {Violation::Kind::DuplicateId, record.id, "duplicate id '" + record.id + "'"});
    }
    if (!record.is_phishing() && record.intent) {
      report.violations.push_back({Violation::Kind::IntentOnLegitimate, record.id,
                                   "legitimate record '" + record.id + "' carries intent " +
                                       std::string(canonical_name(*record.intent))});
    }
    if (record.is_phishing() && !record.intent) {
      report.warnings.push_back({Violation::Kind::PhishingWithoutIntent, record.id,
                                 "phishing record '" + record.id + "' has no intent category"});
    }
  }
  return report;
}

namespace {

// Unbiased draw in [0, bound) from the raw 64-bit engine. The distribution
// adaptors in <random> are implementation-defined, which would make a seeded
// selection differ across standard libraries.
std::uint64_t bounded(std::mt19937_64& engine, std::uint64_t bound) {
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                              std::numeric_limits<std::uint64_t>::max() % bound;
  std::uint64_t x;
  do {
    x = engine();
  } while (x >= limit);
  return x % bound;
}

}  // namespace

std::vector<EmailRecord> select_validation_set(const std::vector<EmailRecord>& records,
                                               std::size_t n, std::uint64_t seed) {
  if (n > records.size()) {
    throw std::invalid_argument("select_validation_set: requested " + std::to_string(n) +
                                " records but only " + std::to_string(records.size()) +
                                " are available");
  }
  std::vector<std::size_t> index(records.size());
  std::iota(index.begin(), index.end(), std::size_t{0});
  std::mt19937_64 engine(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(bounded(engine, records.size() - i));
    std::swap(index[i], index[j]);
  }
  index.resize(n);
  std::sort(index.begin(), index.end());

  std::vector<EmailRecord> out;
  out.reserve(n);
  for (std::size_t i : index) out.push_back(records[i]);
  return out;
}

}  // namespace phishintent

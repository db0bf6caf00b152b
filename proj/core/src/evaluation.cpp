#include "phishintent/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include <json.hpp>

namespace phishintent {

using nlohmann::json;

std::string format_percent(Ratio ratio) {
  if (ratio.denominator == 0) return "n/a";
  // Hundredths of a percent, rounded half up: floor(n * 10000 / d + 1/2).
  const unsigned long long n = ratio.numerator, d = ratio.denominator;
  const unsigned long long hundredths = (n * 20000ULL + d) / (2ULL * d);
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%llu.%02llu%%", hundredths / 100, hundredths % 100);
  return buffer;
}

std::string format_percent(double ratio) {
  if (!std::isfinite(ratio)) return "n/a";
  // The nudge absorbs representation error so 0.86045 (stored as 0.860449...)
  // still rounds up.
  const double hundredths = std::floor(ratio * 10000.0 + 0.5 + 1e-9);
  const auto whole = static_cast<long long>(hundredths);
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%lld.%02lld%%", whole / 100, std::llabs(whole % 100));
  return buffer;
}

std::size_t CategoryConfusion::total() const noexcept {
  std::size_t sum = 0;
  for (const auto& row : counts) {
    for (std::size_t c : row) sum += c;
  }
  return sum;
}

namespace {

using RunIndex = std::unordered_map<std::string_view, const RunRecord*>;

RunIndex index_runs(const std::vector<RunRecord>& runs, const std::vector<EmailRecord>& truth) {
  std::unordered_set<std::string_view> known;
  known.reserve(truth.size());
  for (const auto& email : truth) known.insert(email.id);

  RunIndex index;
  index.reserve(runs.size());
  for (const auto& run : runs) {
    if (!known.count(run.email_id)) {
      throw ScoringError(ScoringError::Kind::UnknownEmail,
                         "run for email '" + run.email_id + "' has no ground truth");
    }
    if (!index.emplace(run.email_id, &run).second) {
      throw ScoringError(ScoringError::Kind::DuplicateRun,
                         "duplicate run for email '" + run.email_id + "'");
    }
  }
  for (const auto& email : truth) {
    if (!index.count(email.id)) {
      throw ScoringError(ScoringError::Kind::MissingRun,
                         "no run for email '" + email.id + "'");
    }
  }
  return index;
}

const ParsedVerdict* verdict_of(const RunRecord& run) {
  return std::get_if<ParsedVerdict>(&run.outcome);
}

bool detection_correct(const RunRecord& run, const EmailRecord& email) {
  const ParsedVerdict* verdict = verdict_of(run);
  return verdict && verdict->is_phishing == email.is_phishing();
}

bool category_correct(const RunRecord& run, const EmailRecord& email) {
  const ParsedVerdict* verdict = verdict_of(run);
  return verdict && verdict->is_phishing && email.intent && verdict->category == email.intent;
}

bool counts_for_category(const EmailRecord& email) {
  return email.is_phishing() && email.intent.has_value();
}

}  // namespace

Ratio detection_accuracy(const std::vector<RunRecord>& runs,
                         const std::vector<EmailRecord>& truth) {
  const RunIndex index = index_runs(runs, truth);
  Ratio ratio{0, truth.size()};
  for (const auto& email : truth) {
    if (detection_correct(*index.at(email.id), email)) ++ratio.numerator;
  }
  return ratio;
}

Ratio category_accuracy(const std::vector<RunRecord>& runs,
                        const std::vector<EmailRecord>& truth) {
  const RunIndex index = index_runs(runs, truth);
  Ratio ratio;
  for (const auto& email : truth) {
    if (!counts_for_category(email)) continue;
    ++ratio.denominator;
    if (category_correct(*index.at(email.id), email)) ++ratio.numerator;
  }
  return ratio;
}

Confusion confusion(const std::vector<RunRecord>& runs, const std::vector<EmailRecord>& truth) {
  const RunIndex index = index_runs(runs, truth);
  Confusion result;
  auto& det = result.detection;
  for (const auto& email : truth) {
    const RunRecord& run = *index.at(email.id);
    const ParsedVerdict* verdict = verdict_of(run);
    if (email.is_phishing()) {
      if (verdict && verdict->is_phishing) {
        ++det.true_positive;
      } else {
        ++det.false_negative;
        if (!verdict) ++det.unparsed_phishing;
      }
    } else {
      if (verdict && !verdict->is_phishing) {
        ++det.true_negative;
      } else {
        ++det.false_positive;
        if (!verdict) ++det.unparsed_legitimate;
      }
    }

    if (!counts_for_category(email)) continue;
    std::size_t column;
    if (!verdict) {
      column = CategoryConfusion::kUnparsed;
    } else if (!verdict->is_phishing || !verdict->category) {
      column = CategoryConfusion::kMissed;
    } else {
      column = static_cast<std::size_t>(*verdict->category);
    }
    ++result.category.at(*email.intent, column);
  }
  return result;
}

Ratio justification_coverage(const std::vector<RunRecord>& runs) {
  Ratio ratio;
  for (const auto& run : runs) {
    const ParsedVerdict* verdict = verdict_of(run);
    if (!verdict) continue;
    ++ratio.denominator;
    if (!justification_quality_flags(*verdict).has(ParseFlag::EmptyJustification)) {
      ++ratio.numerator;
    }
  }
  return ratio;
}

namespace {

void accumulate(CostLatency& total, const RunRecord& run) {
  ++total.runs;
  total.latency += run.latency;
  if (run.cost) {
    total.cost.amount += *run.cost;
    ++total.cost.priced;
  } else {
    ++total.cost.unpriced;
  }
}

}  // namespace

CostLatencySummary cost_latency_summary(const std::vector<RunRecord>& runs) {
  CostLatencySummary summary;
  for (const auto& run : runs) {
    accumulate(summary.per_group[run.group()], run);
    accumulate(summary.overall, run);
  }
  return summary;
}

std::string format_cost(const CostTotal& cost) {
  if (!cost.available()) return "unavailable";
  char buffer[96];
  if (cost.complete()) {
    std::snprintf(buffer, sizeof buffer, "%.4f USD", cost.amount);
  } else {
    std::snprintf(buffer, sizeof buffer, "%.4f USD (incomplete: %zu unpriced)", cost.amount,
                  cost.unpriced);
  }
  return buffer;
}

std::vector<MetricsReport> evaluate(const std::vector<RunRecord>& runs,
                                    const std::vector<EmailRecord>& truth) {
  std::map<GroupKey, std::vector<RunRecord>> groups;
  for (const auto& run : runs) groups[run.group()].push_back(run);

  std::vector<MetricsReport> reports;
  reports.reserve(groups.size());
  for (const auto& [key, group] : groups) {
    MetricsReport report;
    report.key = key;
    report.total = truth.size();
    report.detection = detection_accuracy(group, truth);
    if (key.kind == ExperimentKind::Exp3) report.category = category_accuracy(group, truth);
    const Confusion matrices = confusion(group, truth);
    report.detection_confusion = matrices.detection;
    report.category_confusion = matrices.category;
    report.justification_coverage = justification_coverage(group);
    report.parse_failure_rate.denominator = group.size();
    for (const auto& run : group) {
      if (const ParsedVerdict* verdict = verdict_of(run)) {
        if (verdict->flags.has(ParseFlag::LenientMatchUsed)) ++report.lenient_matches;
      } else {
        ++report.parse_failure_rate.numerator;
      }
      if (run.backend_error) ++report.backend_failures;
      accumulate(report.cost_latency, run);
    }
    reports.push_back(std::move(report));
  }
  return reports;
}

std::string format_cell(Ratio detection, const std::optional<Ratio>& category) {
  std::string cell = format_percent(detection);
  if (category) cell += " / " + format_percent(*category);
  return cell;
}

std::string render_report(const std::vector<MetricsReport>& reports) {
  std::vector<std::string> models;
  std::vector<std::pair<ExperimentKind, ShotMode>> columns;
  std::map<std::pair<std::string, std::string>, std::string> cells;
  for (const auto& report : reports) {
    if (std::find(models.begin(), models.end(), report.key.model_id) == models.end()) {
      models.push_back(report.key.model_id);
    }
    const auto column = std::make_pair(report.key.kind, report.key.mode);
    if (std::find(columns.begin(), columns.end(), column) == columns.end()) {
      columns.push_back(column);
    }
    cells[{report.key.model_id, cell_label(report.key.kind, report.key.mode)}] =
        format_cell(report.detection, report.category);
  }
  std::sort(columns.begin(), columns.end());

  std::vector<std::string> header = {"Model"};
  for (const auto& [kind, mode] : columns) header.push_back(cell_label(kind, mode));
  std::vector<std::vector<std::string>> rows;
  for (const auto& model : models) {
    std::vector<std::string> row = {model};
    for (const auto& [kind, mode] : columns) {
      auto it = cells.find({model, cell_label(kind, mode)});
      row.push_back(it == cells.end() ? "-" : it->second);
    }
    rows.push_back(std::move(row));
  }

  std::vector<std::size_t> widths(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) {
    widths[c] = header[c].size();
    for (const auto& row : rows) widths[c] = std::max(widths[c], row[c].size());
  }
  std::ostringstream out;
  auto emit = [&](const std::vector<std::string>& row) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (c) out << " | ";
      out << row[c];
      if (c + 1 < row.size()) out << std::string(widths[c] - row[c].size(), ' ');
    }
    out << '\n';
  };
  emit(header);
  for (std::size_t c = 0; c < widths.size(); ++c) {
    if (c) out << "-+-";
    out << std::string(widths[c], '-');
  }
  out << '\n';
  for (const auto& row : rows) emit(row);
  return out.str();
}

namespace {

json ratio_json(const Ratio& ratio) {
  return {{"numerator", ratio.numerator},
          {"denominator", ratio.denominator},
          {"value", ratio.value()}};
}

Ratio ratio_from(const json& j) {
  return {j.at("numerator").get<std::size_t>(), j.at("denominator").get<std::size_t>()};
}

const char* const kCategoryColumns[] = {"Phishing via Link", "Phishing via Attachment",
                                        "Phishing via Service", "Other", "missed", "unparsed"};

}  // namespace

std::string export_metrics_json(const std::vector<MetricsReport>& reports) {
  json out = json::array();
  for (const auto& r : reports) {
    json category_rows = json::array();
    for (const auto& row : r.category_confusion.counts) category_rows.push_back(row);
    json entry = {
        {"model", r.key.model_id},
        {"experiment", experiment_number(r.key.kind)},
        {"mode", shot_mode_name(r.key.mode)},
        {"cell", format_cell(r.detection, r.category)},
        {"total", r.total},
        {"detection_accuracy", ratio_json(r.detection)},
        {"category_accuracy", r.category ? ratio_json(*r.category) : json(nullptr)},
        {"detection_confusion",
         {{"true_positive", r.detection_confusion.true_positive},
          {"false_negative", r.detection_confusion.false_negative},
          {"false_positive", r.detection_confusion.false_positive},
          {"true_negative", r.detection_confusion.true_negative},
          {"unparsed_phishing", r.detection_confusion.unparsed_phishing},
          {"unparsed_legitimate", r.detection_confusion.unparsed_legitimate}}},
        {"category_confusion",
         {{"rows", {"Phishing via Link", "Phishing via Attachment", "Phishing via Service",
                    "Other"}},
          {"columns", kCategoryColumns},
          {"counts", category_rows}}},
        {"justification_coverage", ratio_json(r.justification_coverage)},
        {"parse_failure_rate", ratio_json(r.parse_failure_rate)},
        {"lenient_matches", r.lenient_matches},
        {"backend_failures", r.backend_failures},
        {"runs", r.cost_latency.runs},
        {"latency_ms", r.cost_latency.latency.count()},
        {"cost",
         {{"amount", r.cost_latency.cost.available() ? json(r.cost_latency.cost.amount)
                                                     : json(nullptr)},
          {"priced", r.cost_latency.cost.priced},
          {"unpriced", r.cost_latency.cost.unpriced}}},
    };
    out.push_back(std::move(entry));
  }
  return json{{"reports", out}}.dump(2) + "\n";
}

std::vector<MetricsReport> import_metrics_json(std::string_view json_text) {
  const json root = json::parse(json_text);
  std::vector<MetricsReport> reports;
  for (const auto& e : root.at("reports")) {
    MetricsReport r;
    r.key.model_id = e.at("model").get<std::string>();
    r.key.kind = parse_experiment(std::to_string(e.at("experiment").get<int>()));
    r.key.mode = parse_shot_mode(e.at("mode").get<std::string>());
    r.total = e.at("total").get<std::size_t>();
    r.detection = ratio_from(e.at("detection_accuracy"));
    if (!e.at("category_accuracy").is_null()) r.category = ratio_from(e.at("category_accuracy"));
    const auto& dc = e.at("detection_confusion");
    r.detection_confusion = {dc.at("true_positive").get<std::size_t>(),
                             dc.at("false_negative").get<std::size_t>(),
                             dc.at("false_positive").get<std::size_t>(),
                             dc.at("true_negative").get<std::size_t>(),
                             dc.at("unparsed_phishing").get<std::size_t>(),
                             dc.at("unparsed_legitimate").get<std::size_t>()};
    const auto& counts = e.at("category_confusion").at("counts");
    for (std::size_t row = 0; row < 4; ++row) {
      for (std::size_t col = 0; col < 6; ++col) {
        r.category_confusion.counts[row][col] = counts.at(row).at(col).get<std::size_t>();
      }
    }
    r.justification_coverage = ratio_from(e.at("justification_coverage"));
    r.parse_failure_rate = ratio_from(e.at("parse_failure_rate"));
    r.lenient_matches = e.at("lenient_matches").get<std::size_t>();
    r.backend_failures = e.at("backend_failures").get<std::size_t>();
    r.cost_latency.runs = e.at("runs").get<std::size_t>();
    r.cost_latency.latency = std::chrono::milliseconds(e.at("latency_ms").get<long long>());
    const auto& cost = e.at("cost");
    r.cost_latency.cost.amount = cost.at("amount").is_null() ? 0.0 : cost.at("amount").get<double>();
    r.cost_latency.cost.priced = cost.at("priced").get<std::size_t>();
    r.cost_latency.cost.unpriced = cost.at("unpriced").get<std::size_t>();
    reports.push_back(std::move(r));
  }
  return reports;
}

}  // namespace phishintent

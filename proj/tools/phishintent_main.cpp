// phishintent: dataset ingestion, prompt inspection, experiment runs and
// scoring from the command line.

#include <CLI11.hpp>

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <sstream>

#include <json.hpp>

#include "phishintent/dataset.hpp"
#include "phishintent/evaluation.hpp"
#include "phishintent/prompting.hpp"
#include "phishintent/run_log.hpp"
#include "phishintent/runner.hpp"

namespace {

using namespace phishintent;
using nlohmann::json;

constexpr const char* kMetricsFile = "metrics.json";

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream stream(text);
  std::string item;
  while (std::getline(stream, item, ',')) {
    const auto first = item.find_first_not_of(" \t");
    if (first == std::string::npos) continue;
    const auto last = item.find_last_not_of(" \t");
    out.push_back(item.substr(first, last - first + 1));
  }
  return out;
}

std::string default_run_id() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buffer[32];
  std::strftime(buffer, sizeof buffer, "run-%Y%m%dT%H%M%SZ", &tm);
  return buffer;
}

json summary_json(const DatasetSummary& s) {
  json per_category = json::object();
  for (auto c : kAllCategories) per_category[std::string(canonical_name(c))] = s.count(c);
  return {{"total", s.total},
          {"phishing", s.phishing},
          {"legitimate", s.legitimate},
          {"per_category", per_category},
          {"uncategorized_phishing", s.uncategorized_phishing},
          {"removed_by_filter", s.removed_by_filter}};
}

void print_run_result(const RunResult& result) {
  std::cout << "log: " << result.log_path.string() << "\n"
            << "executed: " << result.executed << " (failed " << result.failed << ")\n"
            << "already done: " << result.already_done << "\n"
            << "status: " << (result.complete ? "complete" : "incomplete") << "\n";
}

void print_details(const std::vector<MetricsReport>& reports) {
  CostLatency overall;
  for (const auto& r : reports) {
    std::cout << r.key.model_id << " " << cell_label(r.key.kind, r.key.mode)
              << ": justification coverage " << format_percent(r.justification_coverage)
              << ", parse failures " << format_percent(r.parse_failure_rate)
              << ", lenient matches " << r.lenient_matches << ", backend failures "
              << r.backend_failures << ", latency "
              << static_cast<double>(r.cost_latency.latency.count()) / 1000.0 << " s, cost "
              << format_cost(r.cost_latency.cost) << "\n";
    overall.runs += r.cost_latency.runs;
    overall.latency += r.cost_latency.latency;
    overall.cost.amount += r.cost_latency.cost.amount;
    overall.cost.priced += r.cost_latency.cost.priced;
    overall.cost.unpriced += r.cost_latency.cost.unpriced;
  }
  std::cout << "overall: " << overall.runs << " runs, latency "
            << static_cast<double>(overall.latency.count()) / 1000.0 << " s, cost "
            << format_cost(overall.cost) << "\n";
}

int cmd_ingest(const std::string& input, const std::string& format, const std::string& deny,
               const std::string& output, const std::string& report_path,
               std::optional<std::size_t> sample, std::uint64_t seed) {
  auto records = load_dataset(input, parse_dataset_format(format));
  auto terms = split_list(deny);
  if (terms.empty()) terms = kDefaultDenyTerms;
  auto filtered = filter_bias(records, terms);
  auto kept = std::move(filtered.kept);
  if (sample) kept = select_validation_set(kept, *sample, seed);

  auto validation = validate_dataset(kept);
  validation.summary.removed_by_filter = filtered.removed.size();
  write_dataset(output, kept);

  json removed = json::array();
  for (const auto& r : filtered.removed) removed.push_back(r.id);
  json violations = json::array();
  for (const auto& v : validation.violations) violations.push_back(v.message);
  json warnings = json::array();
  for (const auto& w : validation.warnings) warnings.push_back(w.message);
  json report = {{"input", input},
                 {"output", output},
                 {"deny_terms", terms},
                 {"summary", summary_json(validation.summary)},
                 {"removed_ids", removed},
                 {"violations", violations},
                 {"warnings", warnings}};
  if (!report_path.empty()) {
    std::ofstream out(report_path);
    out << report.dump(2) << "\n";
  }
  std::cout << "kept " << kept.size() << " of " << records.size() << " records ("
            << filtered.removed.size() << " removed by bias filter)\n";
  for (const auto& w : validation.warnings) std::cerr << "warning: " << w.message << "\n";
  for (const auto& v : validation.violations) std::cerr << "error: " << v.message << "\n";
  return validation.ok() ? 0 : 2;
}

int cmd_prompts(const std::string& experiment, const std::string& mode_text,
                const std::string& email_id, const std::string& dataset,
                const std::string& shots_path) {
  const ExperimentKind kind = parse_experiment(experiment);
  const ShotMode mode = parse_shot_mode(mode_text);

  std::vector<FewShotExample> shots;
  if (mode == ShotMode::Few) {
    if (shots_path.empty()) throw std::invalid_argument("--mode few needs --shots <library>");
    shots = shots_for(load_few_shot_library(shots_path), kind);
  }
  if (email_id.empty()) {
    std::cout << base_prompt(kind) << render_examples(shots, kind);
    return 0;
  }
  if (dataset.empty()) throw std::invalid_argument("--email needs --dataset <path>");
  for (const auto& record : load_dataset(dataset)) {
    if (record.id == email_id) {
      std::cout << build_prompt(record, kind, mode, shots).text;
      return 0;
    }
  }
  throw std::invalid_argument("no email '" + email_id + "' in " + dataset);
}

int cmd_eval(const std::string& run_dir, const std::string& truth_path) {
  const auto truth = load_dataset(truth_path);
  const auto records = load_run_records(run_dir);
  const auto reports = evaluate(records, truth);
  std::ofstream out(std::filesystem::path(run_dir) / kMetricsFile);
  out << export_metrics_json(reports);
  std::cout << render_report(reports);
  return 0;
}

int cmd_report(const std::string& run_dir) {
  std::ifstream in(std::filesystem::path(run_dir) / kMetricsFile);
  if (!in) {
    throw std::invalid_argument("no " + std::string(kMetricsFile) + " in " + run_dir +
                                "; run `eval` first");
  }
  std::stringstream buffer;
  buffer << in.rdbuf();
  const auto reports = import_metrics_json(buffer.str());
  std::cout << render_report(reports) << "\n";
  print_details(reports);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LLM phishing detection and intent categorization pipeline"};
  app.require_subcommand(1);

  std::string input, format = "canonical", deny = "enron", output, report_path;
  std::size_t sample = 0;
  std::uint64_t seed = 7;
  auto* ingest = app.add_subcommand("ingest", "Load, bias-filter and validate a labeled corpus");
  ingest->add_option("--input", input, "Input dataset")->required()->check(CLI::ExistingFile);
  ingest->add_option("--format", format, "canonical | kaggle (subject,body,label)");
  ingest->add_option("--deny-terms", deny, "Comma-separated bias terms");
  ingest->add_option("--output", output, "Canonical dataset to write")->required();
  ingest->add_option("--report", report_path, "JSON ingestion report");
  auto* sample_opt = ingest->add_option("--sample", sample, "Draw a validation set of this size");
  ingest->add_option("--seed", seed, "Seed for --sample");

  std::string experiment = "1", mode = "zero", email, dataset, shots;
  bool dump = false;
  auto* prompts = app.add_subcommand("prompts", "Render prompt text");
  prompts->add_option("--experiment", experiment, "1, 2 or 3")->required();
  prompts->add_option("--mode", mode, "zero | few");
  prompts->add_option("--email", email, "Render the full prompt for this record id");
  prompts->add_option("--dataset", dataset, "Dataset holding --email");
  prompts->add_option("--shots", shots, "Few-shot example library");
  prompts->add_flag("--dump", dump, "Print the rendered text");

  std::string models, experiments = "1,2,3", modes = "zero,few", out_dir = "runs", run_id;
  std::size_t workers = 4;
  auto* run = app.add_subcommand("run", "Execute the experiment grid");
  run->add_option("--dataset", dataset, "Canonical dataset")->required();
  run->add_option("--models", models, "Model config (JSON)")->required();
  run->add_option("--experiments", experiments, "Comma-separated subset of 1,2,3");
  run->add_option("--modes", modes, "Comma-separated subset of zero,few");
  run->add_option("--shots", shots, "Few-shot example library");
  run->add_option("--out", out_dir, "Directory holding runs");
  run->add_option("--run-id", run_id, "Run identifier (default: timestamp)");
  run->add_option("--workers", workers, "Worker threads")->check(CLI::PositiveNumber);

  auto* resume_cmd = app.add_subcommand("resume", "Finish an interrupted run");
  resume_cmd->add_option("--run-id", run_id, "Run identifier")->required();
  resume_cmd->add_option("--out", out_dir, "Directory holding runs");

  std::string run_dir, truth;
  auto* eval = app.add_subcommand("eval", "Score a run against ground truth");
  eval->add_option("--run", run_dir, "Run directory")->required();
  eval->add_option("--truth", truth, "Ground-truth dataset")->required();

  auto* report = app.add_subcommand("report", "Print the scored table of a run");
  report->add_option("--run", run_dir, "Run directory")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*ingest) {
      std::optional<std::size_t> n;
      if (*sample_opt) n = sample;
      return cmd_ingest(input, format, deny, output, report_path, n, seed);
    }
    if (*prompts) {
      if (!dump) {
        std::cerr << "nothing to do; pass --dump to print the prompt\n";
        return 1;
      }
      return cmd_prompts(experiment, mode, email, dataset, shots);
    }
    if (*run) {
      std::vector<ExperimentKind> kinds;
      for (const auto& k : split_list(experiments)) kinds.push_back(parse_experiment(k));
      std::vector<ShotMode> shot_modes;
      for (const auto& m : split_list(modes)) shot_modes.push_back(parse_shot_mode(m));
      if (run_id.empty()) run_id = default_run_id();
      RunPlan plan = make_plan(run_id, out_dir, dataset, models, kinds, shot_modes, shots, workers);
      std::cout << "run " << run_id << ": " << plan.cell_count() << " cells\n";
      print_run_result(execute(plan));
      return 0;
    }
    if (*resume_cmd) {
      ExecuteOptions options;
      options.on_warning = [](const std::string& w) { std::cerr << "warning: " << w << "\n"; };
      print_run_result(resume(out_dir, run_id, options));
      return 0;
    }
    if (*eval) return cmd_eval(run_dir, truth);
    if (*report) return cmd_report(run_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

#include "phishintent/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <fstream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "phishintent/parser.hpp"
#include "phishintent/run_log.hpp"

namespace phishintent {

using nlohmann::json;

void RunPlan::validate() const {
  auto fail = [](const std::string& why) {
    throw RunError(RunError::Kind::InvalidPlan, "invalid run plan: " + why);
  };
  if (run_id.empty()) fail("run_id is empty");
  if (run_id.find('/') != std::string::npos || run_id == "." || run_id == "..") {
    fail("run_id must be a plain name");
  }
  if (worker_count < 1) fail("worker_count must be >= 1");
  if (models.empty()) fail("no models");
  if (kinds.empty()) fail("no experiments");
  if (modes.empty()) fail("no shot modes");
  std::set<std::string> names;
  for (const auto& model : models) {
    if (!names.insert(model.name).second) fail("duplicate model name '" + model.name + "'");
  }
  const auto report = validate_dataset(emails);
  if (!report.ok()) fail(report.violations.front().message);

  const bool few = std::find(modes.begin(), modes.end(), ShotMode::Few) != modes.end();
  if (few) {
    if (shots.empty()) fail("few-shot mode requested without a few-shot library");
    for (auto kind : kinds) {
      try {
        render_examples(shots_for(shots, kind), kind);
      } catch (const PromptError& e) {
        fail(cell_label(kind, ShotMode::Few) + ": " + e.what());
      }
    }
  }
}

RunPlan make_plan(std::string run_id, std::filesystem::path out_dir,
                  const std::filesystem::path& dataset, const std::filesystem::path& models,
                  std::vector<ExperimentKind> kinds, std::vector<ShotMode> modes,
                  const std::filesystem::path& shots, std::size_t worker_count) {
  RunPlan plan;
  plan.run_id = std::move(run_id);
  plan.out_dir = std::move(out_dir);
  plan.dataset_path = std::filesystem::absolute(dataset);
  plan.emails = load_dataset(plan.dataset_path);
  plan.models_path = std::filesystem::absolute(models);
  plan.models = load_backend_configs(plan.models_path);
  plan.kinds = std::move(kinds);
  plan.modes = std::move(modes);
  if (!shots.empty()) {
    plan.shots_path = std::filesystem::absolute(shots);
    plan.shots = load_few_shot_library(plan.shots_path);
  }
  plan.worker_count = worker_count;
  return plan;
}

namespace {

void write_manifest(const RunPlan& plan, std::string_view status, const RunResult* result) {
  json kinds = json::array();
  for (auto kind : plan.kinds) kinds.push_back(experiment_number(kind));
  json modes = json::array();
  for (auto mode : plan.modes) modes.push_back(shot_mode_name(mode));
  json manifest = {
      {"run_id", plan.run_id},
      {"dataset", plan.dataset_path.string()},
      {"models", plan.models_path.string()},
      {"experiments", kinds},
      {"modes", modes},
      {"shots", plan.shots_path.empty() ? json(nullptr) : json(plan.shots_path.string())},
      {"worker_count", plan.worker_count},
      {"cells", plan.cell_count()},
      {"status", status},
      {"updated", utc_timestamp()},
  };
  if (result) {
    manifest["executed"] = result->executed;
    manifest["failed"] = result->failed;
  }
  const auto path = plan.run_dir() / kManifestFile;
  auto temp = path;
  temp += ".tmp";
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    out << manifest.dump(2) << '\n';
    if (!out.flush()) throw std::runtime_error("cannot write manifest '" + temp.string() + "'");
  }
  std::filesystem::rename(temp, path);
}

struct Cell {
  const EmailRecord* email;
  std::size_t model;
  ExperimentKind kind;
  ShotMode mode;
};

// A lane is executed front to back by one worker at a time.
using Lane = std::vector<Cell>;

bool ends_with_newline(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary | std::ios::ate);
  if (!in) return true;
  const auto size = in.tellg();
  if (size <= 0) return true;
  in.seekg(-1, std::ios::end);
  char last = 0;
  in.get(last);
  return last == '\n';
}

RunRecord run_cell(const Cell& cell, Backend& backend, const std::vector<FewShotExample>& shots) {
  const PromptBundle bundle = build_prompt(*cell.email, cell.kind, cell.mode,
                                           cell.mode == ShotMode::Few ? shots
                                                                      : std::vector<FewShotExample>{});
  RunRecord record;
  record.email_id = cell.email->id;
  record.model_id = backend.config().name;
  record.kind = cell.kind;
  record.mode = cell.mode;
  record.prompt_hash = sha256_hex(bundle.text);

  const auto started = std::chrono::steady_clock::now();
  try {
    CompletionResponse response = backend.complete(CompletionRequest::from_bundle(bundle));
    record.raw_response = std::move(response.raw_text);
    record.outcome = parse_response(record.raw_response, cell.kind);
    record.latency = response.latency.count() > 0
                         ? response.latency
                         : std::chrono::duration_cast<std::chrono::milliseconds>(
                               std::chrono::steady_clock::now() - started);
    record.cost = response.estimated_cost;
  } catch (const BackendError& e) {
    record.backend_error = std::string(backend_error_name(e.kind())) + ": " + e.what();
    record.outcome = ParseFailure{ParseFailureReason::MissingVerdict, {}};
    record.latency = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - started);
  }
  record.timestamp = utc_timestamp();
  return record;
}

RunResult run_pending(const RunPlan& plan, const std::vector<RunRecord>& done,
                      const ExecuteOptions& options) {
  RunResult result;
  result.log_path = plan.run_dir() / kRunLogFile;
  result.already_done = done.size();

  std::set<CellKey> completed;
  for (const auto& record : done) completed.insert(record.cell());

  std::vector<std::vector<FewShotExample>> shots_by_kind(3);
  for (auto kind : plan.kinds) {
    if (!plan.shots.empty()) {
      shots_by_kind[static_cast<std::size_t>(kind)] = shots_for(plan.shots, kind);
    }
  }

  std::vector<std::unique_ptr<Backend>> backends;
  for (const auto& model : plan.models) {
    backends.push_back(options.backend_factory ? options.backend_factory(model)
                                               : make_backend(model));
  }

  std::vector<Lane> lanes;
  for (std::size_t m = 0; m < plan.models.size(); ++m) {
    const bool serial = backends[m]->remote();
    Lane model_lane;
    for (auto kind : plan.kinds) {
      for (auto mode : plan.modes) {
        for (const auto& email : plan.emails) {
          if (completed.count({email.id, plan.models[m].name, kind, mode})) continue;
          Cell cell{&email, m, kind, mode};
          if (serial) {
            model_lane.push_back(cell);
          } else {
            lanes.push_back({cell});
          }
        }
      }
    }
    if (!model_lane.empty()) lanes.push_back(std::move(model_lane));
  }

  RunLogWriter writer(result.log_path);
  std::atomic<std::size_t> next_lane{0};
  std::atomic<std::size_t> started{0};
  std::atomic<std::size_t> executed{0};
  std::atomic<std::size_t> failed{0};
  std::atomic<bool> stopped{false};

  auto take_cell = [&]() -> bool {
    if (!options.stop_after) return true;
    if (started.fetch_add(1) < *options.stop_after) return true;
    stopped = true;
    return false;
  };

  auto worker = [&] {
    while (!stopped) {
      const std::size_t index = next_lane.fetch_add(1);
      if (index >= lanes.size()) return;
      for (const Cell& cell : lanes[index]) {
        if (!take_cell()) return;
        RunRecord record =
            run_cell(cell, *backends[cell.model], shots_by_kind[static_cast<std::size_t>(cell.kind)]);
        if (record.backend_error) ++failed;
        writer.append(record);
        ++executed;
      }
    }
  };

  const std::size_t threads = std::max<std::size_t>(1, std::min(plan.worker_count, lanes.size()));
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
  for (auto& t : pool) t.join();

  result.executed = executed;
  result.failed = failed;
  result.complete = !stopped && result.already_done + result.executed == plan.cell_count();
  return result;
}

std::vector<ExperimentKind> kinds_from(const json& j) {
  std::vector<ExperimentKind> kinds;
  for (const auto& k : j) kinds.push_back(parse_experiment(std::to_string(k.get<int>())));
  return kinds;
}

std::vector<ShotMode> modes_from(const json& j) {
  std::vector<ShotMode> modes;
  for (const auto& m : j) modes.push_back(parse_shot_mode(m.get<std::string>()));
  return modes;
}

}  // namespace

RunResult execute(const RunPlan& plan, const ExecuteOptions& options) {
  plan.validate();
  const auto dir = plan.run_dir();
  if (std::filesystem::exists(dir / kRunLogFile) || std::filesystem::exists(dir / kManifestFile)) {
    throw RunError(RunError::Kind::RunExists,
                   "run '" + plan.run_id + "' already exists in " + plan.out_dir.string() +
                       "; use resume");
  }
  std::filesystem::create_directories(dir);
  write_manifest(plan, "running", nullptr);
  RunResult result = run_pending(plan, {}, options);
  write_manifest(plan, result.complete ? "complete" : "incomplete", &result);
  return result;
}

RunPlan load_plan(const std::filesystem::path& run_dir) {
  std::ifstream in(run_dir / kManifestFile, std::ios::binary);
  if (!in) {
    throw RunError(RunError::Kind::UnknownRun, "no run manifest in '" + run_dir.string() + "'");
  }
  json manifest = json::parse(in, nullptr, /*allow_exceptions=*/false);
  if (manifest.is_discarded()) {
    throw RunError(RunError::Kind::UnknownRun,
                   "run manifest in '" + run_dir.string() + "' is not valid JSON");
  }
  const auto shots = manifest.at("shots").is_null()
                         ? std::filesystem::path()
                         : std::filesystem::path(manifest.at("shots").get<std::string>());
  return make_plan(manifest.at("run_id").get<std::string>(), run_dir.parent_path(),
                   manifest.at("dataset").get<std::string>(),
                   manifest.at("models").get<std::string>(), kinds_from(manifest.at("experiments")),
                   modes_from(manifest.at("modes")), shots,
                   manifest.at("worker_count").get<std::size_t>());
}

RunResult resume(const std::filesystem::path& out_dir, const std::string& run_id,
                 const ExecuteOptions& options) {
  const auto dir = out_dir / run_id;
  if (!std::filesystem::exists(dir / kManifestFile)) {
    throw RunError(RunError::Kind::UnknownRun,
                   "unknown run '" + run_id + "' in " + out_dir.string());
  }
  const RunPlan plan = load_plan(dir);
  plan.validate();

  const auto log_path = dir / kRunLogFile;
  RunLogContents contents = read_run_log(log_path);
  const bool torn_tail = !ends_with_newline(log_path);
  if (!contents.corrupt_lines.empty() || contents.duplicate_records > 0 || torn_tail) {
    if (options.on_warning) {
      for (auto line : contents.corrupt_lines) {
        options.on_warning("run log line " + std::to_string(line) +
                           " is corrupt; its cell will be re-run");
      }
      if (contents.duplicate_records > 0) {
        options.on_warning(std::to_string(contents.duplicate_records) +
                           " duplicate record(s) dropped from the run log");
      }
    }
    rewrite_run_log(log_path, contents.records);
  }

  write_manifest(plan, "running", nullptr);
  RunResult result = run_pending(plan, contents.records, options);
  result.corrupt_lines = contents.corrupt_lines.size();
  write_manifest(plan, result.complete ? "complete" : "incomplete", &result);
  return result;
}

std::vector<RunRecord> load_run_records(const std::filesystem::path& run_dir) {
  if (!std::filesystem::exists(run_dir / kRunLogFile)) {
    throw RunError(RunError::Kind::UnknownRun, "no run log in '" + run_dir.string() + "'");
  }
  return read_run_log(run_dir / kRunLogFile).records;
}

}  // namespace phishintent

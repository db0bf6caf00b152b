#pragma once

#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "phishintent/backend.hpp"
#include "phishintent/dataset.hpp"
#include "phishintent/evaluation.hpp"
#include "phishintent/prompting.hpp"

namespace phishintent {

struct RunPlan {
  std::string run_id;
  /// The run lives in out_dir / run_id.
  std::filesystem::path out_dir;

  std::filesystem::path dataset_path;
  std::vector<EmailRecord> emails;

  std::filesystem::path models_path;
  std::vector<BackendConfig> models;

  std::vector<ExperimentKind> kinds;
  std::vector<ShotMode> modes;

  /// Required when modes contains Few.
  std::filesystem::path shots_path;
  std::vector<FewShotExample> shots;

  std::size_t worker_count = 1;

  std::filesystem::path run_dir() const { return out_dir / run_id; }
  std::size_t cell_count() const {
    return emails.size() * models.size() * kinds.size() * modes.size();
  }
  /// Throws std::invalid_argument on an unusable plan.
  void validate() const;
};

/// Loads dataset, model config and few-shot library from their paths.
RunPlan make_plan(std::string run_id, std::filesystem::path out_dir,
                  const std::filesystem::path& dataset, const std::filesystem::path& models,
                  std::vector<ExperimentKind> kinds, std::vector<ShotMode> modes,
                  const std::filesystem::path& shots, std::size_t worker_count);

class RunError : public std::runtime_error {
 public:
  enum class Kind { UnknownRun, RunExists, InvalidPlan };
  RunError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

struct ExecuteOptions {
  /// Builds the backend for each model; defaults to make_backend.
  std::function<std::unique_ptr<Backend>(const BackendConfig&)> backend_factory;
  /// Stop handing out cells once this many have been executed in this
  /// invocation; models an interrupted run.
  std::optional<std::size_t> stop_after;
  /// Warnings (corrupt log lines, compaction) are reported here.
  std::function<void(const std::string&)> on_warning;
};

struct RunResult {
  std::filesystem::path log_path;
  std::size_t executed = 0;
  std::size_t already_done = 0;
  std::size_t failed = 0;
  std::size_t corrupt_lines = 0;
  bool complete = false;
};

inline constexpr const char* kRunLogFile = "runs.jsonl";
inline constexpr const char* kManifestFile = "run.json";

/// Starts a new run. Fails with RunExists when the run directory already
/// holds a log.
RunResult execute(const RunPlan& plan, const ExecuteOptions& options = {});

/// Re-reads the manifest and executes only the cells missing from the log.
/// Corrupt lines are dropped (their cells re-run) and the log is compacted.
RunResult resume(const std::filesystem::path& out_dir, const std::string& run_id,
                 const ExecuteOptions& options = {});

/// Reconstructs the plan recorded in a run directory's manifest.
RunPlan load_plan(const std::filesystem::path& run_dir);

/// Reads the deduplicated records of a run.
std::vector<RunRecord> load_run_records(const std::filesystem::path& run_dir);

}  // namespace phishintent

#pragma once

#include <cstdio>
#include <filesystem>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include "phishintent/evaluation.hpp"

namespace phishintent {

/// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view data);

/// Current time as "2025-01-31T12:00:00.123Z".
std::string utc_timestamp();

/// One self-contained JSON object, no trailing newline.
std::string encode_run_record(const RunRecord& record);
/// Throws std::invalid_argument on anything that is not a complete record.
RunRecord decode_run_record(std::string_view line);

struct RunLogContents {
  /// First record per cell, in file order.
  std::vector<RunRecord> records;
  /// 1-based line numbers that failed to decode (torn or garbled writes).
  std::vector<std::size_t> corrupt_lines;
  std::size_t duplicate_records = 0;
};

/// A missing file reads as empty.
RunLogContents read_run_log(const std::filesystem::path& path);

/// Replaces the file atomically (write to a sibling, then rename).
void rewrite_run_log(const std::filesystem::path& path, const std::vector<RunRecord>& records);

/// Serialized appends, each line flushed to the OS before append() returns.
class RunLogWriter {
 public:
  explicit RunLogWriter(const std::filesystem::path& path);
  ~RunLogWriter();
  RunLogWriter(const RunLogWriter&) = delete;
  RunLogWriter& operator=(const RunLogWriter&) = delete;

  void append(const RunRecord& record);
  /// Appends raw bytes; for simulating torn writes in tests.
  void append_raw(std::string_view bytes);

 private:
  std::mutex mutex_;
  std::FILE* file_ = nullptr;
  std::filesystem::path path_;
};

}  // namespace phishintent

#include "phishintent/run_log.hpp"

#include <openssl/evp.h>
#include <unistd.h>

#include <chrono>
#include <ctime>
#include <fstream>
#include <set>
#include <stdexcept>

#include <json.hpp>

namespace phishintent {

using nlohmann::json;

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(length * 2);
  for (unsigned int i = 0; i < length; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0x0f]);
  }
  return out;
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t seconds = std::chrono::system_clock::to_time_t(now);
  const auto millis =
      std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() %
      1000;
  std::tm tm{};
  gmtime_r(&seconds, &tm);
  char buffer[40];
  const std::size_t n = std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%S", &tm);
  std::snprintf(buffer + n, sizeof buffer - n, ".%03lldZ", static_cast<long long>(millis));
  return buffer;
}

namespace {

json outcome_json(const ParseOutcome& outcome) {
  if (const auto* verdict = std::get_if<ParsedVerdict>(&outcome)) {
    json flags = json::array();
    for (auto flag : kAllParseFlags) {
      if (verdict->flags.has(flag)) flags.push_back(flag_name(flag));
    }
    return {{"status", "parsed"},
            {"is_phishing", verdict->is_phishing},
            {"category", verdict->category ? json(canonical_name(*verdict->category))
                                           : json(nullptr)},
            {"justification", verdict->justification ? json(*verdict->justification)
                                                     : json(nullptr)},
            {"flags", flags}};
  }
  const auto& failure = std::get<ParseFailure>(outcome);
  return {{"status", "parse_failure"},
          {"reason", failure_reason_name(failure.reason)},
          {"raw_excerpt", failure.raw_excerpt}};
}

ParseOutcome outcome_from(const json& j) {
  const std::string status = j.at("status").get<std::string>();
  if (status == "parsed") {
    ParsedVerdict verdict;
    verdict.is_phishing = j.at("is_phishing").get<bool>();
    if (!j.at("category").is_null()) {
      verdict.category = parse_category(j.at("category").get<std::string>());
    }
    if (!j.at("justification").is_null()) {
      verdict.justification = j.at("justification").get<std::string>();
    }
    for (const auto& name : j.at("flags")) {
      auto flag = parse_flag_name(name.get<std::string>());
      if (!flag) throw std::invalid_argument("unknown parse flag");
      verdict.flags.set(*flag);
    }
    if (!verdict.is_phishing && verdict.category) {
      throw std::invalid_argument("category recorded on a negative verdict");
    }
    return verdict;
  }
  if (status == "parse_failure") {
    auto reason = parse_failure_reason(j.at("reason").get<std::string>());
    if (!reason) throw std::invalid_argument("unknown parse failure reason");
    return ParseFailure{*reason, j.at("raw_excerpt").get<std::string>()};
  }
  throw std::invalid_argument("unknown outcome status '" + status + "'");
}

}  // namespace

std::string encode_run_record(const RunRecord& record) {
  json j = {
      {"email_id", record.email_id},
      {"model_id", record.model_id},
      {"experiment", experiment_number(record.kind)},
      {"mode", shot_mode_name(record.mode)},
      {"prompt_hash", record.prompt_hash},
      {"raw_response", record.raw_response},
      {"outcome", outcome_json(record.outcome)},
      {"backend_error", record.backend_error ? json(*record.backend_error) : json(nullptr)},
      {"latency_ms", record.latency.count()},
      {"cost", record.cost ? json(*record.cost) : json(nullptr)},
      {"timestamp", record.timestamp},
  };
  // Invalid UTF-8 from a model is replaced rather than aborting the run.
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

RunRecord decode_run_record(std::string_view line) {
  json j = json::parse(line, nullptr, /*allow_exceptions=*/false);
  if (j.is_discarded() || !j.is_object()) throw std::invalid_argument("not a JSON object");
  try {
    RunRecord record;
    record.email_id = j.at("email_id").get<std::string>();
    record.model_id = j.at("model_id").get<std::string>();
    record.kind = parse_experiment(std::to_string(j.at("experiment").get<int>()));
    record.mode = parse_shot_mode(j.at("mode").get<std::string>());
    record.prompt_hash = j.at("prompt_hash").get<std::string>();
    record.raw_response = j.at("raw_response").get<std::string>();
    record.outcome = outcome_from(j.at("outcome"));
    if (!j.at("backend_error").is_null()) {
      record.backend_error = j.at("backend_error").get<std::string>();
    }
    record.latency = std::chrono::milliseconds(j.at("latency_ms").get<long long>());
    if (!j.at("cost").is_null()) record.cost = j.at("cost").get<double>();
    record.timestamp = j.at("timestamp").get<std::string>();
    if (record.email_id.empty() || record.model_id.empty()) {
      throw std::invalid_argument("empty cell key");
    }
    return record;
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("incomplete run record: ") + e.what());
  } catch (const UnknownCategory& e) {
    throw std::invalid_argument(e.what());
  }
}

RunLogContents read_run_log(const std::filesystem::path& path) {
  RunLogContents contents;
  std::ifstream in(path, std::ios::binary);
  if (!in) return contents;

  std::set<CellKey> seen;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    try {
      RunRecord record = decode_run_record(line);
      if (!seen.insert(record.cell()).second) {
        ++contents.duplicate_records;
        continue;
      }
      contents.records.push_back(std::move(record));
    } catch (const std::invalid_argument&) {
      contents.corrupt_lines.push_back(number);
    }
  }
  return contents;
}

void rewrite_run_log(const std::filesystem::path& path, const std::vector<RunRecord>& records) {
  auto temp = path;
  temp += ".rewrite";
  {
    std::ofstream out(temp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write '" + temp.string() + "'");
    for (const auto& record : records) out << encode_run_record(record) << '\n';
    out.flush();
    if (!out) throw std::runtime_error("write failed for '" + temp.string() + "'");
  }
  std::filesystem::rename(temp, path);
}

RunLogWriter::RunLogWriter(const std::filesystem::path& path) : path_(path) {
  file_ = std::fopen(path.c_str(), "ab");
  if (!file_) throw std::runtime_error("cannot open run log '" + path.string() + "'");
}

RunLogWriter::~RunLogWriter() {
  if (file_) {
    std::fflush(file_);
    ::fsync(::fileno(file_));
    std::fclose(file_);
  }
}

void RunLogWriter::append(const RunRecord& record) {
  std::string line = encode_run_record(record);
  line.push_back('\n');
  append_raw(line);
}

void RunLogWriter::append_raw(std::string_view bytes) {
  std::lock_guard lock(mutex_);
  if (std::fwrite(bytes.data(), 1, bytes.size(), file_) != bytes.size() ||
      std::fflush(file_) != 0) {
    throw std::runtime_error("append to run log '" + path_.string() + "' failed");
  }
}

}  // namespace phishintent

#include <algorithm>
#include <fstream>
#include <sstream>

#include "phishintent/backend.hpp"

namespace phishintent {

std::string escape_script_text(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  for (char c : text) {
    switch (c) {
      case '\\':
        out += "\\\\";
        break;
      case '\n':
        out += "\\n";
        break;
      case '\r':
        out += "\\r";
        break;
      case '\t':
        out += "\\t";
        break;
      default:
        out.push_back(c);
    }
  }
  return out;
}

std::string unescape_script_text(std::string_view text, std::size_t line) {
  std::string out;
  out.reserve(text.size());
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '\\') {
      out.push_back(text[i]);
      continue;
    }
    if (i + 1 >= text.size()) {
      throw ScriptError(line, "line " + std::to_string(line) + ": dangling backslash");
    }
    switch (text[++i]) {
      case 'n':
        out.push_back('\n');
        break;
      case 'r':
        out.push_back('\r');
        break;
      case 't':
        out.push_back('\t');
        break;
      case '\\':
        out.push_back('\\');
        break;
      default:
        throw ScriptError(line, "line " + std::to_string(line) + ": unknown escape '\\" +
                                    std::string(1, text[i]) + "'");
    }
  }
  return out;
}

ScriptTable parse_script(std::string_view text) {
  std::unordered_map<std::string, std::string> entries;
  std::size_t line_number = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(start, end - start);
    start = end + 1;
    ++line_number;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;

    const auto tab = line.find('\t');
    if (tab == std::string_view::npos) {
      throw ScriptError(line_number,
                        "line " + std::to_string(line_number) + ": missing TAB separator");
    }
    std::string id(line.substr(0, tab));
    if (id.empty()) {
      throw ScriptError(line_number, "line " + std::to_string(line_number) + ": empty id");
    }
    std::string response = unescape_script_text(line.substr(tab + 1), line_number);
    if (!entries.emplace(id, std::move(response)).second) {
      throw ScriptError(line_number,
                        "line " + std::to_string(line_number) + ": duplicate id '" + id + "'");
    }
  }
  return ScriptTable(std::move(entries));
}

ScriptTable load_script(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ScriptError(0, "cannot open script '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_script(buffer.str());
}

std::string format_script(const ScriptTable& table) {
  std::vector<const std::pair<const std::string, std::string>*> sorted;
  for (const auto& entry : table.entries()) sorted.push_back(&entry);
  std::sort(sorted.begin(), sorted.end(),
            [](const auto* a, const auto* b) { return a->first < b->first; });
  std::string out;
  for (const auto* entry : sorted) {
    out += entry->first;
    out += '\t';
    out += escape_script_text(entry->second);
    out += '\n';
  }
  return out;
}

const std::string* ScriptTable::find(const CompletionRequest& request) const {
  if (auto it = entries_.find(request.email_id + "|" + cell_label(request.kind, request.mode));
      it != entries_.end()) {
    return &it->second;
  }
  if (auto it = entries_.find(request.email_id); it != entries_.end()) return &it->second;
  return nullptr;
}

namespace {

class ScriptedBackend final : public Backend {
 public:
  ScriptedBackend(BackendConfig config, ScriptTable table)
      : Backend(std::move(config)), table_(std::move(table)) {}

  CompletionResponse complete(const CompletionRequest& request) override {
    CompletionResponse response;
    if (const std::string* text = table_.find(request)) {
      response.raw_text = *text;
    } else if (config().script_fallback) {
      response.raw_text = *config().script_fallback;
    } else {
      throw BackendError(BackendError::Kind::MissingScriptEntry,
                         "no scripted response for '" + request.email_id + "'", 1);
    }
    return response;
  }

 private:
  const ScriptTable table_;
};

}  // namespace

std::unique_ptr<Backend> scripted_backend(BackendConfig config, ScriptTable table) {
  return std::make_unique<ScriptedBackend>(std::move(config), std::move(table));
}

std::unique_ptr<Backend> scripted_responses(const std::filesystem::path& path,
                                            std::optional<std::string> fallback) {
  BackendConfig config;
  config.name = "scripted:" + path.filename().string();
  config.kind = BackendKind::ScriptedMock;
  config.script_path = path;
  config.script_fallback = std::move(fallback);
  return scripted_backend(std::move(config), load_script(path));
}

}  // namespace phishintent

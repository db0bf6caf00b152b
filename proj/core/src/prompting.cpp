#include "phishintent/prompting.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

#include "phishintent/csv.hpp"

namespace phishintent {

namespace {

// Listings are reproduced byte-for-byte, including trailing spaces and the
// uneven indentation of the category rules.
constexpr std::string_view kExp1Prompt =
    "You are an email classifier analyzing potential phishing emails. Your task is as follows:\n"
    "\n"
    "1. Determine if this email is malicious (Yes/No) \n"
    "2. Give a short justification for your decision, explain the result.\n"
    "\n"
    "The response should follow this format\n"
    "\n"
    "Phishing: YES/NO\n"
    "Justification: \n";

constexpr std::string_view kExp2Prompt =
    "You are an email classifier analyzing potential phishing emails. Your task is as follows:\n"
    "\n"
    " 1.Determine if this email is malicious (Yes/No).  \n"
    "Here are a few categories of phishing emails and some basic rules on how to find them :\n"
    " - Phishing via Attachment\n"
    "    If the primary goal of the phishing email is to get the user to download something\n"
    "   - Phishing via Link\n"
    "    If the primary goal of the phishing email is to get the user to \"click here\" or click "
    "any URL or link\n"
    "   - Phishing via Service\n"
    "    Where the goal is not To CLICK or download in the inbox, but to get the user to use "
    "some other service, like calling a number or some other way they could phish outside of "
    "the email inbox\n"
    "   - Other\n"
    "   If the email is clearly a phishing attempt but does not fall into any of the defined "
    "categories\n"
    "2. Give a short justification for your decision, explain the result.\n"
    "\n"
    "The response should follow this format\n"
    "\n"
    "Phishing: YES/NO\n"
    "Justification: \n";

constexpr std::string_view kExp3Prompt =
    "You are an email classifier analyzing potential phishing emails. Your task is as follows:\n"
    "\n"
    "1. Determine if this email is malicious (Yes/No).\n"
    "2. ONLY If the email is malicious, classify it into one of the following categories:\n"
    "  - Phishing via Attachment\n"
    "    If the primary goal of the phishing email is to get the user to download something\n"
    "   - Phishing via Link\n"
    "    If the primary goal of the phishing email is to get the user to \"click here\" or click "
    "any URL or link\n"
    "   - Phishing via Service\n"
    "    Where the goal is not To CLICK or download in the inbox, but to get the user to use "
    "some other service, like calling a number or some other way they could phish outside of "
    "the email inbox\n"
    "   - Other\n"
    "   If the email is clearly a phishing attempt but does not fall into any of the defined "
    "categories\n"
    "3. Give a short justification for your decision, and explain the result.\n"
    "\n"
    "The response should follow this format\n"
    "\n"
    "Phishing: YES/NO\n"
    "Category: \n"
    "Justification: \n";

constexpr std::string_view kExamplesHeader =
    "\nHere are some examples of emails and the desired output:\n";

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find('\n', start);
    if (end == std::string_view::npos) {
      lines.push_back(text.substr(start));
      break;
    }
    lines.push_back(text.substr(start, end - start));
    start = end + 1;
  }
  return lines;
}

bool is_category_line(std::string_view line) {
  return lowercase(trim(line)).rfind("category:", 0) == 0;
}

bool mentions_category(std::string_view expected_output) {
  const std::string lower = lowercase(expected_output);
  if (lower.find("phishing via") != std::string::npos) return true;
  for (auto line : split_lines(expected_output)) {
    if (is_category_line(line)) return true;
  }
  return false;
}

void check_expected_output(const FewShotExample& shot) {
  const auto first_line = split_lines(shot.expected_output).front();
  const auto head = trim(first_line);
  if (head != "Phishing: YES" && head != "Phishing: NO") {
    throw PromptError(PromptError::Kind::InvalidExpectedOutput,
                      "few-shot example '" + shot.id +
                          "': expected output must begin with \"Phishing: YES\" or "
                          "\"Phishing: NO\"");
  }
}

std::size_t category_rank(const FewShotExample& shot) {
  if (!shot.category) return kMappedCategories.size() + 1;
  const auto it = std::find(kMappedCategories.begin(), kMappedCategories.end(), *shot.category);
  return it == kMappedCategories.end() ? kMappedCategories.size()
                                       : static_cast<std::size_t>(it - kMappedCategories.begin());
}

std::string strip_category_lines(std::string_view output) {
  std::string out;
  bool first = true;
  for (auto line : split_lines(output)) {
    if (is_category_line(line)) continue;
    if (!first) out.push_back('\n');
    out.append(line);
    first = false;
  }
  return out;
}

std::string ensure_category_line(const FewShotExample& shot) {
  const auto head = trim(split_lines(shot.expected_output).front());
  if (head != "Phishing: YES" || !shot.category) return shot.expected_output;
  for (auto line : split_lines(shot.expected_output)) {
    if (is_category_line(line)) return shot.expected_output;
  }
  const auto newline = shot.expected_output.find('\n');
  const std::string category_line = "Category: " + std::string(canonical_name(*shot.category));
  if (newline == std::string::npos) return shot.expected_output + "\n" + category_line;
  return shot.expected_output.substr(0, newline + 1) + category_line + "\n" +
         shot.expected_output.substr(newline + 1);
}

}  // namespace

int experiment_number(ExperimentKind kind) noexcept {
  switch (kind) {
    case ExperimentKind::Exp1:
      return 1;
    case ExperimentKind::Exp2:
      return 2;
    case ExperimentKind::Exp3:
      return 3;
  }
  return 1;
}

ExperimentKind parse_experiment(std::string_view text) {
  std::string key = lowercase(trim(text));
  if (key.rfind("exp", 0) == 0) key.erase(0, 3);
  if (key == "1") return ExperimentKind::Exp1;
  if (key == "2") return ExperimentKind::Exp2;
  if (key == "3") return ExperimentKind::Exp3;
  throw std::invalid_argument("unknown experiment '" + std::string(text) + "'");
}

std::string_view shot_mode_name(ShotMode mode) noexcept {
  return mode == ShotMode::Zero ? "zero" : "few";
}

ShotMode parse_shot_mode(std::string_view text) {
  const std::string key = lowercase(trim(text));
  if (key == "zero") return ShotMode::Zero;
  if (key == "few") return ShotMode::Few;
  throw std::invalid_argument("unknown shot mode '" + std::string(text) + "'");
}

std::string cell_label(ExperimentKind kind, ShotMode mode) {
  return "Exp" + std::to_string(experiment_number(kind)) +
         (mode == ShotMode::Zero ? "-Zero" : "-Few");
}

std::string_view base_prompt(ExperimentKind kind) noexcept {
  switch (kind) {
    case ExperimentKind::Exp1:
      return kExp1Prompt;
    case ExperimentKind::Exp2:
      return kExp2Prompt;
    case ExperimentKind::Exp3:
      return kExp3Prompt;
  }
  return kExp1Prompt;
}

std::string render_examples(const std::vector<FewShotExample>& shots, ExperimentKind kind) {
  if (shots.empty()) return {};

  for (const auto& shot : shots) check_expected_output(shot);

  if (kind == ExperimentKind::Exp1) {
    for (const auto& shot : shots) {
      if (mentions_category(shot.expected_output)) {
        throw PromptError(PromptError::Kind::CategoryInBinaryExample,
                          "few-shot example '" + shot.id +
                              "' mentions an intent category, which the binary prompt omits");
      }
    }
  } else {
    std::array<std::size_t, 3> counts{};
    for (const auto& shot : shots) {
      if (!shot.category) {
        throw PromptError(PromptError::Kind::UncategorizedExample,
                          "few-shot example '" + shot.id + "' has no intent category");
      }
      const std::size_t rank = category_rank(shot);
      if (rank >= counts.size()) {
        throw PromptError(PromptError::Kind::WrongExampleCount,
                          "few-shot example '" + shot.id +
                              "' is categorized Other; only Link, Attachment and Service "
                              "examples are rendered");
      }
      ++counts[rank];
    }
    for (std::size_t i = 0; i < counts.size(); ++i) {
      if (counts[i] != 2) {
        throw PromptError(PromptError::Kind::WrongExampleCount,
                          "expected 2 few-shot examples for " +
                              std::string(canonical_name(kMappedCategories[i])) + ", found " +
                              std::to_string(counts[i]));
      }
    }
  }

  std::vector<const FewShotExample*> ordered;
  ordered.reserve(shots.size());
  for (const auto& shot : shots) ordered.push_back(&shot);
  std::stable_sort(ordered.begin(), ordered.end(),
                   [](const FewShotExample* a, const FewShotExample* b) {
                     return category_rank(*a) < category_rank(*b);
                   });

  std::string block(kExamplesHeader);
  std::size_t number = 1;
  for (const FewShotExample* shot : ordered) {
    block += "\nExample " + std::to_string(number++);
    if (kind == ExperimentKind::Exp2 && shot->category) {
      block += " (" + std::string(canonical_name(*shot->category)) + ")";
    }
    block += ":\nSubject: " + shot->subject + "\nBody: " + shot->body + "\nOutput:\n";
    std::string_view output = shot->expected_output;
    while (!output.empty() && (output.back() == '\n' || output.back() == '\r')) {
      output.remove_suffix(1);
    }
    block.append(output);
    block.push_back('\n');
  }
  return block;
}

std::string render_email(const EmailRecord& record) {
  return "\nEmail:\nSubject: " + record.subject + "\nBody: " + record.body + "\n";
}

PromptBundle build_prompt(const EmailRecord& record, ExperimentKind kind, ShotMode mode,
                          const std::vector<FewShotExample>& shots) {
  if (mode == ShotMode::Zero && !shots.empty()) {
    throw PromptError(PromptError::Kind::ShotsInZeroMode,
                      "zero-shot prompt for '" + record.id + "' was given " +
                          std::to_string(shots.size()) + " examples");
  }
  if (mode == ShotMode::Few && shots.empty()) {
    throw PromptError(PromptError::Kind::MissingShots,
                      "few-shot prompt for '" + record.id + "' was given no examples");
  }

  PromptBundle bundle;
  bundle.kind = kind;
  bundle.mode = mode;
  bundle.email_id = record.id;
  bundle.text.reserve(base_prompt(kind).size() + record.subject.size() + record.body.size() +
                      64);
  bundle.text.append(base_prompt(kind));
  bundle.text.append(render_examples(shots, kind));
  bundle.text.append(render_email(record));
  for (const auto& shot : shots) bundle.example_ids.push_back(shot.id);
  return bundle;
}

std::vector<FewShotExample> shots_for(const std::vector<FewShotExample>& library,
                                      ExperimentKind kind) {
  std::vector<FewShotExample> out;
  if (kind == ExperimentKind::Exp1) {
    for (const auto& shot : library) {
      FewShotExample copy = shot;
      copy.expected_output = strip_category_lines(shot.expected_output);
      out.push_back(std::move(copy));
    }
    return out;
  }
  for (auto category : kMappedCategories) {
    std::size_t taken = 0;
    for (const auto& shot : library) {
      if (taken == 2) break;
      if (shot.category != category) continue;
      FewShotExample copy = shot;
      copy.expected_output = kind == ExperimentKind::Exp2
                                 ? strip_category_lines(shot.expected_output)
                                 : ensure_category_line(shot);
      out.push_back(std::move(copy));
      ++taken;
    }
  }
  return out;
}

std::vector<FewShotExample> parse_few_shot_library(std::string_view text) {
  std::vector<csv::Row> rows;
  try {
    rows = csv::parse(text);
  } catch (const csv::CsvError& e) {
    throw PromptError(PromptError::Kind::Io, std::string("few-shot library: ") + e.what());
  }
  if (rows.empty()) throw PromptError(PromptError::Kind::Io, "few-shot library is empty");

  const auto& header = rows.front();
  auto column = [&](std::string_view name) {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (lowercase(trim(header[i])) == name) return i;
    }
    throw PromptError(PromptError::Kind::Io,
                      "few-shot library header lacks column '" + std::string(name) + "'");
  };
  const std::size_t id = column("id"), subject = column("subject"), body = column("body"),
                    label = column("label"), category = column("category"),
                    expected = column("expected_output");

  std::vector<FewShotExample> library;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() != header.size()) {
      throw PromptError(PromptError::Kind::Io, "few-shot library row " + std::to_string(r + 1) +
                                                   ": wrong field count");
    }
    FewShotExample shot;
    shot.id = std::string(trim(row[id]));
    shot.subject = row[subject];
    shot.body = row[body];
    shot.expected_output = row[expected];
    const auto label_text = trim(row[label]);
    if (label_text != "0" && label_text != "1") {
      throw PromptError(PromptError::Kind::Io, "few-shot library row " + std::to_string(r + 1) +
                                                   ": label must be 0 or 1");
    }
    if (!trim(row[category]).empty()) {
      const auto parsed = try_parse_category(row[category]);
      if (!parsed) {
        throw PromptError(PromptError::Kind::Io, "few-shot library row " +
                                                     std::to_string(r + 1) +
                                                     ": unknown category '" + row[category] + "'");
      }
      shot.category = parsed;
    }
    check_expected_output(shot);
    const bool says_yes = trim(split_lines(shot.expected_output).front()) == "Phishing: YES";
    if (says_yes != (label_text == "1")) {
      throw PromptError(PromptError::Kind::InvalidExpectedOutput,
                        "few-shot example '" + shot.id +
                            "': expected output disagrees with its label");
    }
    library.push_back(std::move(shot));
  }
  return library;
}

std::vector<FewShotExample> load_few_shot_library(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw PromptError(PromptError::Kind::Io,
                      "cannot open few-shot library '" + path.string() + "'");
  }
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_few_shot_library(buffer.str());
}

}  // namespace phishintent

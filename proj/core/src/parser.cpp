#include "phishintent/parser.hpp"

#include <algorithm>
#include <cctype>
#include <vector>

namespace phishintent {

namespace {

constexpr std::size_t kExcerptBytes = 160;

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n\f\v");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n\f\v");
  return s.substr(first, last - first + 1);
}

bool starts_with(std::string_view s, std::string_view prefix) {
  return s.substr(0, prefix.size()) == prefix;
}

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t start = 0;
  while (true) {
    const auto end = text.find('\n', start);
    std::string_view line =
        text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return lines;
}

std::string excerpt(std::string_view raw) {
  if (raw.size() <= kExcerptBytes) return std::string(raw);
  std::size_t cut = kExcerptBytes;
  // Back off to a UTF-8 code point boundary.
  while (cut > 0 && (static_cast<unsigned char>(raw[cut]) & 0xC0) == 0x80) --cut;
  return std::string(raw.substr(0, cut));
}

// Justification text starting after the marker on line `index`, greedy to
// the end of the response.
std::optional<std::string> capture_justification(const std::vector<std::string_view>& lines,
                                                 std::size_t index,
                                                 std::string_view first_line_rest) {
  std::string text(first_line_rest);
  for (std::size_t i = index + 1; i < lines.size(); ++i) {
    text.push_back('\n');
    text.append(lines[i]);
  }
  const auto trimmed = trim(text);
  if (trimmed.empty()) return std::nullopt;
  return std::string(trimmed);
}

enum class Tri { Yes, No, Neither, Both };

struct Scan {
  std::vector<Tri> verdicts;  // one per verdict marker found
  std::vector<std::string> categories;  // raw category values in order
  std::optional<std::size_t> justification_line;
  std::string justification_rest;
};

Tri combine(const std::vector<Tri>& verdicts) {
  bool yes = false, no = false;
  for (Tri t : verdicts) {
    if (t == Tri::Both) return Tri::Both;
    yes |= t == Tri::Yes;
    no |= t == Tri::No;
  }
  if (yes && no) return Tri::Both;
  if (yes) return Tri::Yes;
  if (no) return Tri::No;
  return Tri::Neither;
}

// ---- strict pass -----------------------------------------------------------

Scan scan_strict(const std::vector<std::string_view>& lines) {
  Scan scan;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (starts_with(lines[i], "Justification:")) {
      scan.justification_line = i;
      scan.justification_rest = std::string(lines[i].substr(14));
      break;
    }
  }
  const std::size_t limit = scan.justification_line.value_or(lines.size());
  for (std::size_t i = 0; i < limit; ++i) {
    const auto line = lines[i];
    if (starts_with(line, "Phishing:")) {
      const auto value = trim(line.substr(9));
      // Anything but a bare YES/NO defers the whole response to the lenient pass.
      scan.verdicts.push_back(value == "YES" ? Tri::Yes : value == "NO" ? Tri::No : Tri::Both);
    } else if (starts_with(line, "Category:")) {
      scan.categories.emplace_back(trim(line.substr(9)));
    }
  }
  return scan;
}

// ---- lenient pass ----------------------------------------------------------

// Removes markdown emphasis anywhere in the line, then leading bullets,
// heading marks, quote marks and "1." style ordinals.
std::string clean_marker_line(std::string_view line) {
  std::string out;
  out.reserve(line.size());
  for (char c : line) {
    if (c == '*' || c == '_' || c == '`') continue;
    out.push_back(c);
  }
  std::size_t pos = 0;
  for (bool changed = true; changed;) {
    changed = false;
    while (pos < out.size() &&
           (std::isspace(static_cast<unsigned char>(out[pos])) || out[pos] == '-' ||
            out[pos] == '+' || out[pos] == '#' || out[pos] == '>' || out[pos] == '|')) {
      ++pos;
      changed = true;
    }
    std::size_t digits = pos;
    while (digits < out.size() && std::isdigit(static_cast<unsigned char>(out[digits]))) ++digits;
    if (digits > pos && digits < out.size() && (out[digits] == '.' || out[digits] == ')')) {
      pos = digits + 1;
      changed = true;
    }
  }
  return out.substr(pos);
}

// If `line` is `<word> :` (any case, optional spaces before the colon),
// returns the text after the colon.
std::optional<std::string> marker_value(const std::string& line, std::string_view word) {
  if (line.size() < word.size()) return std::nullopt;
  for (std::size_t i = 0; i < word.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(line[i])) != word[i]) return std::nullopt;
  }
  std::size_t pos = word.size();
  while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t')) ++pos;
  if (pos >= line.size() || line[pos] != ':') return std::nullopt;
  return line.substr(pos + 1);
}

Tri yes_no_tokens(std::string_view text) {
  bool yes = false, no = false;
  std::string word;
  auto flush = [&] {
    if (word == "yes") yes = true;
    if (word == "no") no = true;
    word.clear();
  };
  for (char c : text) {
    if (std::isalnum(static_cast<unsigned char>(c))) {
      word.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else {
      flush();
    }
  }
  flush();
  if (yes && no) return Tri::Both;
  if (yes) return Tri::Yes;
  if (no) return Tri::No;
  return Tri::Neither;
}

// Next non-blank line after `index` within [0, limit), cleaned.
std::optional<std::string> next_value_line(const std::vector<std::string_view>& lines,
                                           std::size_t index, std::size_t limit) {
  for (std::size_t i = index + 1; i < limit; ++i) {
    if (!trim(lines[i]).empty()) return clean_marker_line(lines[i]);
  }
  return std::nullopt;
}

Scan scan_lenient_range(const std::vector<std::string_view>& lines, std::size_t begin,
                        std::size_t end, Scan scan) {
  for (std::size_t i = begin; i < end; ++i) {
    const std::string cleaned = clean_marker_line(lines[i]);
    if (auto value = marker_value(cleaned, "phishing")) {
      std::string_view v = trim(*value);
      std::optional<std::string> fallback;
      if (v.empty()) {
        fallback = next_value_line(lines, i, end);
        if (fallback) v = *fallback;
      }
      scan.verdicts.push_back(yes_no_tokens(v));
    } else if (auto category = marker_value(cleaned, "category")) {
      std::string_view v = trim(*category);
      if (v.empty()) {
        if (auto next = next_value_line(lines, i, end)) {
          scan.categories.push_back(*next);
          continue;
        }
      }
      scan.categories.emplace_back(v);
    }
  }
  return scan;
}

Scan scan_lenient(const std::vector<std::string_view>& lines) {
  Scan scan;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const std::string cleaned = clean_marker_line(lines[i]);
    if (auto rest = marker_value(cleaned, "justification")) {
      scan.justification_line = i;
      scan.justification_rest = *rest;
      break;
    }
  }
  const std::size_t limit = scan.justification_line.value_or(lines.size());
  scan = scan_lenient_range(lines, 0, limit, std::move(scan));
  // A verdict placed after the justification is still a verdict.
  if (scan.verdicts.empty() && limit < lines.size()) {
    scan = scan_lenient_range(lines, limit + 1, lines.size(), std::move(scan));
  }
  return scan;
}

// ---- shared resolution -----------------------------------------------------

struct Resolution {
  std::optional<ParsedVerdict> verdict;
  ParseFailureReason reason = ParseFailureReason::MissingVerdict;
};

Resolution resolve(const Scan& scan, const std::vector<std::string_view>& lines,
                   ExperimentKind kind) {
  Resolution result;
  if (scan.verdicts.empty()) {
    result.reason = ParseFailureReason::MissingVerdict;
    return result;
  }
  const Tri verdict = combine(scan.verdicts);
  if (verdict == Tri::Both) {
    result.reason = ParseFailureReason::AmbiguousVerdict;
    return result;
  }
  if (verdict == Tri::Neither) {
    result.reason = ParseFailureReason::MissingVerdict;
    return result;
  }

  ParsedVerdict parsed;
  parsed.is_phishing = verdict == Tri::Yes;

  if (kind == ExperimentKind::Exp3) {
    std::optional<IntentCategory> category;
    bool conflicting = false;
    for (const auto& text : scan.categories) {
      auto c = try_parse_category(text);
      if (!c) continue;
      if (category && *category != *c) conflicting = true;
      if (!category) category = c;
    }
    if (parsed.is_phishing) {
      if (!category || conflicting) {
        result.reason = ParseFailureReason::UnknownCategory;
        return result;
      }
      parsed.category = category;
    } else if (category) {
      parsed.flags.set(ParseFlag::CategoryOnNegativeVerdict);
    }
  }

  if (scan.justification_line) {
    parsed.justification =
        capture_justification(lines, *scan.justification_line, scan.justification_rest);
  }
  if (!parsed.justification) parsed.flags.set(ParseFlag::EmptyJustification);
  result.verdict = std::move(parsed);
  return result;
}

}  // namespace

std::string_view flag_name(ParseFlag flag) noexcept {
  switch (flag) {
    case ParseFlag::LenientMatchUsed:
      return "LenientMatchUsed";
    case ParseFlag::EmptyJustification:
      return "EmptyJustification";
    case ParseFlag::CategoryOnNegativeVerdict:
      return "CategoryOnNegativeVerdict";
  }
  return "";
}

std::optional<ParseFlag> parse_flag_name(std::string_view name) noexcept {
  for (auto flag : kAllParseFlags) {
    if (flag_name(flag) == name) return flag;
  }
  return std::nullopt;
}

std::string_view failure_reason_name(ParseFailureReason reason) noexcept {
  switch (reason) {
    case ParseFailureReason::MissingVerdict:
      return "MissingVerdict";
    case ParseFailureReason::AmbiguousVerdict:
      return "AmbiguousVerdict";
    case ParseFailureReason::UnknownCategory:
      return "UnknownCategory";
  }
  return "";
}

std::optional<ParseFailureReason> parse_failure_reason(std::string_view name) noexcept {
  for (auto reason : {ParseFailureReason::MissingVerdict, ParseFailureReason::AmbiguousVerdict,
                      ParseFailureReason::UnknownCategory}) {
    if (failure_reason_name(reason) == name) return reason;
  }
  return std::nullopt;
}

ParseOutcome parse_response(std::string_view raw, ExperimentKind kind) {
  try {
    const auto lines = split_lines(raw);

    if (auto strict = resolve(scan_strict(lines), lines, kind); strict.verdict) {
      return *strict.verdict;
    }
    auto lenient = resolve(scan_lenient(lines), lines, kind);
    if (lenient.verdict) {
      lenient.verdict->flags.set(ParseFlag::LenientMatchUsed);
      return *lenient.verdict;
    }
    return ParseFailure{lenient.reason, excerpt(raw)};
  } catch (...) {
    // Allocation failure is the only realistic source; keep the contract total.
    return ParseFailure{ParseFailureReason::MissingVerdict, {}};
  }
}

ParseFlags justification_quality_flags(const ParsedVerdict& verdict) {
  ParseFlags flags;
  if (!verdict.justification || trim(*verdict.justification).empty()) {
    flags.set(ParseFlag::EmptyJustification);
  }
  return flags;
}

std::string render_response(bool is_phishing, std::optional<IntentCategory> category,
                            std::string_view justification, ExperimentKind kind) {
  std::string out = is_phishing ? "Phishing: YES\n" : "Phishing: NO\n";
  if (kind == ExperimentKind::Exp3 && is_phishing && category) {
    out += "Category: ";
    out += canonical_name(*category);
    out += '\n';
  }
  out += "Justification: ";
  out += justification;
  return out;
}

}  // namespace phishintent

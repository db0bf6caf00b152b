#pragma once

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "phishintent/prompting.hpp"
#include "phishintent/taxonomy.hpp"

namespace phishintent {

enum class ParseFlag : std::uint8_t {
  LenientMatchUsed = 1u << 0,
  EmptyJustification = 1u << 1,
  CategoryOnNegativeVerdict = 1u << 2,
};

class ParseFlags {
 public:
  ParseFlags() = default;
  ParseFlags(std::initializer_list<ParseFlag> flags) {
    for (auto f : flags) set(f);
  }

  void set(ParseFlag flag) noexcept { bits_ |= static_cast<std::uint8_t>(flag); }
  bool has(ParseFlag flag) const noexcept { return (bits_ & static_cast<std::uint8_t>(flag)) != 0; }
  bool empty() const noexcept { return bits_ == 0; }
  std::uint8_t bits() const noexcept { return bits_; }

  friend bool operator==(ParseFlags, ParseFlags) = default;

 private:
  std::uint8_t bits_ = 0;
};

std::string_view flag_name(ParseFlag flag) noexcept;
std::optional<ParseFlag> parse_flag_name(std::string_view name) noexcept;
inline constexpr ParseFlag kAllParseFlags[] = {ParseFlag::LenientMatchUsed,
                                               ParseFlag::EmptyJustification,
                                               ParseFlag::CategoryOnNegativeVerdict};

struct ParsedVerdict {
  bool is_phishing = false;
  /// Only ever set alongside is_phishing.
  std::optional<IntentCategory> category;
  /// Trimmed; never empty when present.
  std::optional<std::string> justification;
  ParseFlags flags;

  friend bool operator==(const ParsedVerdict&, const ParsedVerdict&) = default;
};

enum class ParseFailureReason { MissingVerdict, AmbiguousVerdict, UnknownCategory };

std::string_view failure_reason_name(ParseFailureReason reason) noexcept;
std::optional<ParseFailureReason> parse_failure_reason(std::string_view name) noexcept;

struct ParseFailure {
  ParseFailureReason reason = ParseFailureReason::MissingVerdict;
  std::string raw_excerpt;

  friend bool operator==(const ParseFailure&, const ParseFailure&) = default;
};

/// A failure is scored as a wrong answer, never dropped.
using ParseOutcome = std::variant<ParsedVerdict, ParseFailure>;

/// Never throws. Tries the exact response format first and falls back to a
/// tolerant reading (any case, markdown bullets and emphasis, first standalone
/// YES/NO after the marker), flagging LenientMatchUsed when it does.
///
/// The Category line is read for Exp3 only. A YES verdict there without a
/// recognizable category is an UnknownCategory failure; Other is a real
/// answer, not a fallback.
ParseOutcome parse_response(std::string_view raw, ExperimentKind kind);

/// EmptyJustification iff the justification is absent or whitespace-only.
ParseFlags justification_quality_flags(const ParsedVerdict& verdict);

/// Renders a response in the exact format parse_response's strict pass reads.
/// Category is written for Exp3 positive verdicts only.
std::string render_response(bool is_phishing, std::optional<IntentCategory> category,
                            std::string_view justification, ExperimentKind kind);

inline bool is_parsed(const ParseOutcome& outcome) noexcept {
  return std::holds_alternative<ParsedVerdict>(outcome);
}

}  // namespace phishintent

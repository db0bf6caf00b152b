#pragma once

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace phishintent {

/// Phishing intent: what the sender wants the recipient to do next.
enum class IntentCategory { Link, Attachment, Service, Other };

inline constexpr std::array<IntentCategory, 4> kAllCategories = {
    IntentCategory::Link, IntentCategory::Attachment, IntentCategory::Service,
    IntentCategory::Other};

/// Categories backed by an ATT&CK T1566 sub-technique, in few-shot block order.
inline constexpr std::array<IntentCategory, 3> kMappedCategories = {
    IntentCategory::Link, IntentCategory::Attachment, IntentCategory::Service};

struct TechniqueRef {
  std::string_view technique_id;
  std::string_view technique_name;

  friend bool operator==(const TechniqueRef&, const TechniqueRef&) = default;
};

class UnknownCategory : public std::runtime_error {
 public:
  explicit UnknownCategory(std::string text);
  const std::string& text() const noexcept { return text_; }

 private:
  std::string text_;
};

/// "Phishing via Link", "Phishing via Attachment", "Phishing via Service", "Other".
std::string_view canonical_name(IntentCategory category) noexcept;

/// Attachment -> T1566.001, Link -> T1566.002, Service -> T1566.003, Other -> none.
std::optional<TechniqueRef> technique_for(IntentCategory category) noexcept;

/// Reverse of technique_for over the three mapped sub-techniques.
std::optional<IntentCategory> category_for_technique(std::string_view technique_id) noexcept;

/// Rule text used in the categorized prompts, without the listing's indentation.
std::string_view category_description(IntentCategory category) noexcept;

/// Normalizes then matches exactly; never guesses.
///
/// Normalization: trim, case-fold, collapse internal whitespace, strip leading
/// list markers ("-", "*", "1.", "2)") and surrounding punctuation/markdown.
/// Accepts the four canonical names plus the bare words "link", "attachment"
/// and "service".
std::optional<IntentCategory> try_parse_category(std::string_view text);

/// Throws UnknownCategory when try_parse_category finds no match.
IntentCategory parse_category(std::string_view text);

/// The normalized form try_parse_category matches against. Exposed for tests.
std::string normalize_category_text(std::string_view text);

}  // namespace phishintent

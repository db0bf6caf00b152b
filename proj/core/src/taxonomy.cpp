#include "phishintent/taxonomy.hpp"

#include <cctype>

namespace phishintent {

UnknownCategory::UnknownCategory(std::string text)
    : std::runtime_error("unknown intent category: '" + text + "'"), text_(std::move(text)) {}

std::string_view canonical_name(IntentCategory category) noexcept {
  switch (category) {
    case IntentCategory::Link:
      return "Phishing via Link";
    case IntentCategory::Attachment:
      return "Phishing via Attachment";
    case IntentCategory::Service:
      return "Phishing via Service";
    case IntentCategory::Other:
      return "Other";
  }
  return "Other";
}

std::optional<TechniqueRef> technique_for(IntentCategory category) noexcept {
  switch (category) {
    case IntentCategory::Attachment:
      return TechniqueRef{"T1566.001", "Spearphishing Attachment"};
    case IntentCategory::Link:
      return TechniqueRef{"T1566.002", "Spearphishing Link"};
    case IntentCategory::Service:
      return TechniqueRef{"T1566.003", "Spearphishing via Service"};
    case IntentCategory::Other:
      return std::nullopt;
  }
  return std::nullopt;
}

std::optional<IntentCategory> category_for_technique(std::string_view technique_id) noexcept {
  for (auto category : kMappedCategories) {
    if (technique_for(category)->technique_id == technique_id) return category;
  }
  return std::nullopt;
}

std::string_view category_description(IntentCategory category) noexcept {
  switch (category) {
    case IntentCategory::Attachment:
      return "If the primary goal of the phishing email is to get the user to download "
             "something";
    case IntentCategory::Link:
      return "If the primary goal of the phishing email is to get the user to \"click here\" "
             "or click any URL or link";
    case IntentCategory::Service:
      return "Where the goal is not To CLICK or download in the inbox, but to get the user to "
             "use some other service, like calling a number or some other way they could "
             "phish outside of the email inbox";
    case IntentCategory::Other:
      return "If the email is clearly a phishing attempt but does not fall into any of the "
             "defined categories";
  }
  return {};
}

namespace {

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }
bool is_punct(char c) { return std::ispunct(static_cast<unsigned char>(c)) != 0; }
bool is_digit(char c) { return std::isdigit(static_cast<unsigned char>(c)) != 0; }

// Drops one leading "12." / "3)" style ordinal, if present.
bool strip_ordinal(std::string_view& s) {
  std::size_t i = 0;
  while (i < s.size() && is_digit(s[i])) ++i;
  if (i == 0 || i >= s.size() || (s[i] != '.' && s[i] != ')')) return false;
  s.remove_prefix(i + 1);
  return true;
}

}  // namespace

std::string normalize_category_text(std::string_view text) {
  std::string_view s = text;
  for (bool changed = true; changed;) {
    changed = false;
    while (!s.empty() && (is_space(s.front()) || is_punct(s.front()))) {
      s.remove_prefix(1);
      changed = true;
    }
    if (strip_ordinal(s)) changed = true;
  }
  while (!s.empty() && (is_space(s.back()) || is_punct(s.back()))) s.remove_suffix(1);

  std::string out;
  out.reserve(s.size());
  bool pending_space = false;
  for (char c : s) {
    if (is_space(c)) {
      pending_space = true;
      continue;
    }
    if (pending_space && !out.empty()) out.push_back(' ');
    pending_space = false;
    out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
  }
  return out;
}

std::optional<IntentCategory> try_parse_category(std::string_view text) {
  const std::string key = normalize_category_text(text);
  if (key == "phishing via link" || key == "link") return IntentCategory::Link;
  if (key == "phishing via attachment" || key == "attachment") return IntentCategory::Attachment;
  if (key == "phishing via service" || key == "service") return IntentCategory::Service;
  if (key == "other") return IntentCategory::Other;
  return std::nullopt;
}

IntentCategory parse_category(std::string_view text) {
  if (auto category = try_parse_category(text)) return *category;
  throw UnknownCategory(std::string(text));
}

}  // namespace phishintent

#include <algorithm>
#include <array>
#include <cctype>

#include "phishintent/backend.hpp"
#include "phishintent/parser.hpp"

namespace phishintent {

namespace {

// Any of these marks the email as phishing.
constexpr std::array<std::string_view, 20> kSuspicionCues = {
    "verify your account", "verify your", "suspended", "suspension", "urgent",
    "immediately", "password", "confirm your", "unusual activity", "security alert",
    "click here", "winner", "prize", "lottery", "gift card",
    "wire transfer", "within 24 hours", "update your billing", "unlock", "final notice",
};

// Delivery vector, checked in this order; no hit means Other.
constexpr std::array<std::string_view, 6> kLinkCues = {
    "http://", "https://", "www.", "click here", "click the link", "follow the link"};
constexpr std::array<std::string_view, 7> kAttachmentCues = {
    "attached", "attachment", "download", "open the file", ".zip", ".exe", ".docm"};
constexpr std::array<std::string_view, 8> kServiceCues = {
    "call ", "phone", "text us", "sms", "whatsapp", "gift card", "wire transfer", "reply with"};

std::string lowercase(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

// The target email is the last "Email:" section rendered into the prompt;
// everything before it is instructions and examples.
std::string_view target_email(std::string_view prompt) {
  constexpr std::string_view kMarker = "\nEmail:\nSubject: ";
  const auto pos = prompt.rfind(kMarker);
  if (pos == std::string_view::npos) return prompt;
  return prompt.substr(pos + kMarker.size() - std::string_view("Subject: ").size());
}

template <std::size_t N>
std::optional<std::string_view> first_hit(const std::string& text,
                                          const std::array<std::string_view, N>& cues) {
  for (auto cue : cues) {
    if (text.find(cue) != std::string::npos) return cue;
  }
  return std::nullopt;
}

}  // namespace

CompletionResponse heuristic_complete(const CompletionRequest& request) {
  const std::string email = lowercase(target_email(request.prompt));

  CompletionResponse response;
  const auto suspicion = first_hit(email, kSuspicionCues);
  if (!suspicion) {
    response.raw_text = render_response(
        false, std::nullopt,
        "No suspicious cues matched; the email reads as routine correspondence.",
        ExperimentKind::Exp3);
    return response;
  }

  IntentCategory category = IntentCategory::Other;
  std::optional<std::string_view> vector;
  if ((vector = first_hit(email, kLinkCues))) {
    category = IntentCategory::Link;
  } else if ((vector = first_hit(email, kAttachmentCues))) {
    category = IntentCategory::Attachment;
  } else if ((vector = first_hit(email, kServiceCues))) {
    category = IntentCategory::Service;
  }

  std::string justification = "Matched suspicious cue \"" + std::string(*suspicion) + "\"";
  if (vector) {
    justification += " and delivery cue \"" + std::string(*vector) + "\"";
  } else {
    justification += " with no recognizable delivery vector";
  }
  justification += ".";
  response.raw_text = render_response(true, category, justification, ExperimentKind::Exp3);
  return response;
}

}  // namespace phishintent

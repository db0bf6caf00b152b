#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "phishintent/dataset.hpp"
#include "phishintent/taxonomy.hpp"

namespace phishintent {

/// Exp1: binary detection. Exp2: detection with the category rules folded
/// into step 1. Exp3: detection, then categorization, then justification.
enum class ExperimentKind { Exp1, Exp2, Exp3 };
enum class ShotMode { Zero, Few };

int experiment_number(ExperimentKind kind) noexcept;
/// Accepts "1", "2", "3" and "exp1".."exp3" (any case).
ExperimentKind parse_experiment(std::string_view text);
std::string_view shot_mode_name(ShotMode mode) noexcept;  // "zero" / "few"
ShotMode parse_shot_mode(std::string_view text);
/// "Exp3-Zero" style column label.
std::string cell_label(ExperimentKind kind, ShotMode mode);

struct FewShotExample {
  std::string id;
  std::string subject;
  std::string body;
  /// Rendered in the response format; first line is "Phishing: YES" or "Phishing: NO".
  std::string expected_output;
  std::optional<IntentCategory> category;
};

struct PromptBundle {
  std::string text;
  ExperimentKind kind = ExperimentKind::Exp1;
  ShotMode mode = ShotMode::Zero;
  std::vector<std::string> example_ids;
  std::string email_id;
};

class PromptError : public std::runtime_error {
 public:
  enum class Kind {
    WrongExampleCount,
    CategoryInBinaryExample,
    InvalidExpectedOutput,
    UncategorizedExample,
    ShotsInZeroMode,
    MissingShots,
    Io,
  };
  PromptError(Kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// The instruction text for an experiment, ending with the response-format
/// scaffold and a trailing newline.
std::string_view base_prompt(ExperimentKind kind) noexcept;

/// Few-shot block inserted between the base prompt and the target email.
/// Empty input renders as empty text.
///
/// Exp2/Exp3 require exactly two examples for each of Link, Attachment and
/// Service and render them in that category order. Exp1 examples must not
/// mention a category in their expected output.
std::string render_examples(const std::vector<FewShotExample>& shots, ExperimentKind kind);

/// "\nEmail:\nSubject: <subject>\nBody: <body>\n"
std::string render_email(const EmailRecord& record);

/// base_prompt(kind) + render_examples(shots) + render_email(record).
PromptBundle build_prompt(const EmailRecord& record, ExperimentKind kind, ShotMode mode,
                          const std::vector<FewShotExample>& shots);

/// Derives the per-experiment example set from a library whose expected
/// outputs use the categorized (Exp3) response format: Exp1 drops the
/// Category line, Exp2 keeps it out of the output but labels each example,
/// Exp3 keeps it. Exp2/Exp3 select the first two examples per mapped category.
std::vector<FewShotExample> shots_for(const std::vector<FewShotExample>& library,
                                      ExperimentKind kind);

/// Example library: canonical dataset columns plus `expected_output`.
std::vector<FewShotExample> parse_few_shot_library(std::string_view text);
std::vector<FewShotExample> load_few_shot_library(const std::filesystem::path& path);

}  // namespace phishintent

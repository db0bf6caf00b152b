#include <doctest.h>

#include "phishintent/prompting.hpp"
#include "support.hpp"

using namespace phishintent;

namespace {

EmailRecord target() {
  return {"email_x", "Account notice", "Please review https://example.org now.", Label::Phishing,
          IntentCategory::Link, "t"};
}

const std::vector<FewShotExample>& library() {
  static const auto lib = load_few_shot_library(testing::shot_library());
  return lib;
}

std::size_t count_of(const std::string& haystack, const std::string& needle) {
  std::size_t n = 0;
  for (auto at = haystack.find(needle); at != std::string::npos; at = haystack.find(needle, at + 1)) {
    ++n;
  }
  return n;
}

}  // namespace

TEST_CASE("base prompts match the golden files byte for byte") {
  CHECK(std::string(base_prompt(ExperimentKind::Exp1)) ==
        testing::read_file(testing::golden_dir() / "exp1.txt"));
  CHECK(std::string(base_prompt(ExperimentKind::Exp2)) ==
        testing::read_file(testing::golden_dir() / "exp2.txt"));
  CHECK(std::string(base_prompt(ExperimentKind::Exp3)) ==
        testing::read_file(testing::golden_dir() / "exp3.txt"));
}

TEST_CASE("prompts carry the instruction phrases each experiment needs") {
  const std::string role = "You are an email classifier analyzing potential phishing emails";
  for (auto kind : {ExperimentKind::Exp1, ExperimentKind::Exp2, ExperimentKind::Exp3}) {
    CHECK(std::string(base_prompt(kind)).starts_with(role));
  }
  CHECK(std::string(base_prompt(ExperimentKind::Exp2))
            .find("Here are a few categories of phishing emails") != std::string::npos);
  CHECK(std::string(base_prompt(ExperimentKind::Exp3)).find("ONLY If the email is malicious") !=
        std::string::npos);
  CHECK(std::string(base_prompt(ExperimentKind::Exp3)).ends_with("Category: \nJustification: \n"));
  CHECK(std::string(base_prompt(ExperimentKind::Exp2)).find("Category:") == std::string::npos);
}

TEST_CASE("every category rule appears in the categorized prompts") {
  for (auto kind : {ExperimentKind::Exp2, ExperimentKind::Exp3}) {
    const std::string text(base_prompt(kind));
    for (auto c : kAllCategories) {
      CHECK(text.find(category_description(c)) != std::string::npos);
      if (c != IntentCategory::Other) {
        CHECK(text.find(canonical_name(c)) != std::string::npos);
      }
    }
  }
}

TEST_CASE("the binary prompt never mentions a category, with or without shots") {
  const auto zero = build_prompt(target(), ExperimentKind::Exp1, ShotMode::Zero, {});
  const auto few = build_prompt(target(), ExperimentKind::Exp1, ShotMode::Few,
                                shots_for(library(), ExperimentKind::Exp1));
  for (const auto* text : {&zero.text, &few.text}) {
    CHECK(text->find("Phishing via") == std::string::npos);
    CHECK(text->find("Category") == std::string::npos);
  }
}

TEST_CASE("prompt assembly is deterministic") {
  const auto shots = shots_for(library(), ExperimentKind::Exp3);
  const auto a = build_prompt(target(), ExperimentKind::Exp3, ShotMode::Few, shots);
  const auto b = build_prompt(target(), ExperimentKind::Exp3, ShotMode::Few, shots);
  CHECK(a.text == b.text);
  CHECK(a.example_ids == b.example_ids);
  CHECK(a.email_id == "email_x");
}

TEST_CASE("few-shot prompts differ from zero-shot only by the example block") {
  for (auto kind : {ExperimentKind::Exp1, ExperimentKind::Exp2, ExperimentKind::Exp3}) {
    const auto shots = shots_for(library(), kind);
    const auto zero = build_prompt(target(), kind, ShotMode::Zero, {});
    const auto few = build_prompt(target(), kind, ShotMode::Few, shots);
    const std::string block = render_examples(shots, kind);
    CHECK_FALSE(block.empty());
    CHECK(few.text == std::string(base_prompt(kind)) + block + render_email(target()));
    CHECK(zero.text == std::string(base_prompt(kind)) + render_email(target()));
  }
}

TEST_CASE("categorized shots come two per category in Link, Attachment, Service order") {
  const auto shots = shots_for(library(), ExperimentKind::Exp3);
  REQUIRE(shots.size() == 6);
  const std::string block = render_examples(shots, ExperimentKind::Exp3);
  const auto link = block.find("Category: Phishing via Link");
  const auto attachment = block.find("Category: Phishing via Attachment");
  const auto service = block.find("Category: Phishing via Service");
  CHECK(link < attachment);
  CHECK(attachment < service);
  CHECK(count_of(block, "\nExample ") == 6);
  CHECK(block.find("Example 6:") != std::string::npos);

  const std::string exp2 = render_examples(shots_for(library(), ExperimentKind::Exp2),
                                           ExperimentKind::Exp2);
  CHECK(count_of(exp2, "(Phishing via Link)") == 2);
  CHECK(exp2.find("Category:") == std::string::npos);
}

TEST_CASE("example validation") {
  auto shots = shots_for(library(), ExperimentKind::Exp3);
  SUBCASE("wrong count") {
    shots.pop_back();
    try {
      render_examples(shots, ExperimentKind::Exp3);
      FAIL("expected an error");
    } catch (const PromptError& e) {
      CHECK(e.kind() == PromptError::Kind::WrongExampleCount);
    }
  }
  SUBCASE("category leaking into binary examples") {
    try {
      render_examples(shots, ExperimentKind::Exp1);
      FAIL("expected an error");
    } catch (const PromptError& e) {
      CHECK(e.kind() == PromptError::Kind::CategoryInBinaryExample);
    }
  }
  SUBCASE("shots in zero mode and no shots in few mode") {
    CHECK_THROWS_AS(build_prompt(target(), ExperimentKind::Exp3, ShotMode::Zero, shots),
                    PromptError);
    CHECK_THROWS_AS(build_prompt(target(), ExperimentKind::Exp3, ShotMode::Few, {}), PromptError);
  }
  SUBCASE("expected output must open with a verdict") {
    shots[0].expected_output = "Maybe.";
    try {
      render_examples(shots, ExperimentKind::Exp3);
      FAIL("expected an error");
    } catch (const PromptError& e) {
      CHECK(e.kind() == PromptError::Kind::InvalidExpectedOutput);
    }
  }
}

TEST_CASE("experiment and mode names") {
  CHECK(parse_experiment("3") == ExperimentKind::Exp3);
  CHECK(parse_experiment("EXP2") == ExperimentKind::Exp2);
  CHECK_THROWS(parse_experiment("4"));
  CHECK(parse_shot_mode("few") == ShotMode::Few);
  CHECK_THROWS(parse_shot_mode("many"));
  CHECK(cell_label(ExperimentKind::Exp3, ShotMode::Zero) == "Exp3-Zero");
  CHECK(render_email(target()) ==
        "\nEmail:\nSubject: Account notice\nBody: Please review https://example.org now.\n");
}

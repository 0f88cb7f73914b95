#pragma once

// Rule-based stand-in for the LLM judges. Replies are driven by markers in
// the rendered slot values:
//   coverage       "[confuse]" anywhere -> Not Enough Information, else any
//                  answer with "[refutes]" -> Refuted, else any with
//                  "[supports]" -> Supported, else Not Enough Information;
//                  "[garble-cov]" -> unparsable reply
//   answerability  0 iff the question holds "[unanswerable]"
//   atomicity      "[atom:k]" -> first k criteria YES; otherwise a question
//                  containing " and " fails single_focus and no_conjunctions
//   correctness    0 iff the answer holds "[wrong]"
//   "[garble-ans]", "[garble-atom]" (question) and "[garble-corr]" (answer)
//   make that judge reply unparsable.

#include <string>
#include <string_view>

#include "claimforge/prompts.hpp"
#include "json.hpp"

namespace claimforge::testing {

// Text between "<tag>\n" and the next "\n</tag>"; empty when absent.
inline std::string slot_value(std::string_view prompt, std::string_view tag) {
  const std::string open = "<" + std::string(tag) + ">\n";
  const std::string close = "\n</" + std::string(tag) + ">";
  const auto a = prompt.find(open);
  if (a == std::string_view::npos) return {};
  const auto b = prompt.find(close, a + open.size());
  if (b == std::string_view::npos) return {};
  return std::string(prompt.substr(a + open.size(), b - a - open.size()));
}

inline bool has(std::string_view text, std::string_view marker) {
  return text.find(marker) != std::string_view::npos;
}

inline std::string scripted_coverage_reply(std::string_view answers) {
  if (has(answers, "[garble-cov]")) return "I cannot decide.";
  if (has(answers, "[confuse]")) return "Mixed signals.\n<verdict>Not Enough Information</verdict>";
  if (has(answers, "[refutes]")) return "The answers contradict the claim.\n<verdict>Refuted</verdict>";
  if (has(answers, "[supports]")) return "All parts check out.\n<verdict>Supported</verdict>";
  return "Nothing decisive.\n<verdict>Not Enough Information</verdict>";
}

inline std::string scripted_atomicity_reply(std::string_view question) {
  if (has(question, "[garble-atom]")) return "looks fine";
  static const char* kKeys[] = {"is_question", "single_focus", "no_conjunctions", "verifiable",
                                "grounded"};
  bool yes[5] = {true, true, true, true, true};
  const auto m = question.find("[atom:");
  if (m != std::string_view::npos) {
    const int k = question[m + 6] - '0';
    for (int i = 0; i < 5; ++i) yes[i] = i < k;
  } else if (has(question, " and ")) {
    yes[1] = yes[2] = false;
  }
  std::string out = "<answer>\n";
  for (int i = 0; i < 5; ++i) out += std::string(kKeys[i]) + ":" + (yes[i] ? "YES" : "NO") + "\n";
  return out + "</answer>";
}

inline std::string scripted_judge_reply(const nlohmann::json& request) {
  const std::string tmpl = request.value("template", std::string());
  const std::string prompt = request.at("prompt").get<std::string>();
  if (tmpl == to_string(TemplateId::kCoverageVerdict)) {
    return scripted_coverage_reply(slot_value(prompt, "answers"));
  }
  if (tmpl == to_string(TemplateId::kAnswerability)) {
    const std::string q = slot_value(prompt, "question");
    if (has(q, "[garble-ans]")) return "maybe";
    return has(q, "[unanswerable]") ? "<answer>0</answer>" : "<answer>1</answer>";
  }
  if (tmpl == to_string(TemplateId::kAtomicityChecklist)) {
    return scripted_atomicity_reply(slot_value(prompt, "question"));
  }
  if (tmpl == to_string(TemplateId::kAnswerCorrectness)) {
    const std::string s = slot_value(prompt, "sentence");
    if (has(s, "[garble-corr]")) return "unclear";
    return has(s, "[wrong]") ? "<answer>0</answer>" : "<answer>1</answer>";
  }
  return "unsupported template";
}

}  // namespace claimforge::testing

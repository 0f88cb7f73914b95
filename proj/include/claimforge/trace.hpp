#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "claimforge/corpus.hpp"

namespace claimforge {

struct Cycle {
  std::string question;
  std::string answer;
  std::optional<std::string> post_think;

  bool operator==(const Cycle&) const = default;
};

struct Trace {
  std::string initial_think;
  std::vector<Cycle> cycles;
  Label verdict = Label::kSupported;

  bool operator==(const Trace&) const = default;
};

// Structural checks behind the format reward, in report order.
enum class FormatCondition : std::size_t {
  kThinkPresent = 0,        // at least one <think> block
  kThinkBeforeQuestion,     // first <think> precedes the first <question>
  kQuestionPresent,         // at least one <question> block
  kBalancedCounts,          // #question == #answer
  kAlternation,             // strict question -> answer alternation
  kSingleVerification,      // exactly one <verification> block
  kValidVerdict,            // verification content is Supported/Refuted
  kWellNested,              // all known tags nested and closed
  kNothingAfterVerdict,     // only whitespace after </verification>
  kMinTwoCycles,            // n >= 2
};

inline constexpr std::size_t kFormatConditionCount = 10;

std::string_view to_string(FormatCondition c);

struct ParseReport {
  // Present only when tags are well nested, questions and answers alternate,
  // every question/answer is non-empty, and a valid verdict exists.
  std::optional<Trace> trace;
  std::array<std::pair<FormatCondition, bool>, kFormatConditionCount> conditions{};
  std::optional<std::string> raw_verdict_text;

  // Best-effort extraction, filled even when `trace` is absent: question
  // blocks immediately followed by an answer block, and the verdict of the
  // last verification block if it parses.
  std::vector<Cycle> partial_cycles;
  std::optional<Label> partial_verdict;

  bool holds(FormatCondition c) const {
    return conditions[static_cast<std::size_t>(c)].second;
  }
  std::size_t satisfied() const;
};

// Lenient: accepts any input, never throws. Unknown tags are plain text.
ParseReport parse_trace(std::string_view text);

std::string render_trace(const Trace& trace);

// True if the answer declares it cannot be answered from the evidence
// ("I don't know" / "I do not know", case-insensitive).
bool is_abstention(std::string_view answer);

}  // namespace claimforge

#include "claimforge/trace.hpp"

#include <algorithm>
#include <cctype>

namespace claimforge {

std::string_view to_string(FormatCondition c) {
  switch (c) {
    case FormatCondition::kThinkPresent: return "think_present";
    case FormatCondition::kThinkBeforeQuestion: return "think_before_question";
    case FormatCondition::kQuestionPresent: return "question_present";
    case FormatCondition::kBalancedCounts: return "balanced_counts";
    case FormatCondition::kAlternation: return "alternation";
    case FormatCondition::kSingleVerification: return "single_verification";
    case FormatCondition::kValidVerdict: return "valid_verdict";
    case FormatCondition::kWellNested: return "well_nested";
    case FormatCondition::kNothingAfterVerdict: return "nothing_after_verdict";
    case FormatCondition::kMinTwoCycles: return "min_two_cycles";
  }
  return "?";
}

std::size_t ParseReport::satisfied() const {
  return static_cast<std::size_t>(std::count_if(
      conditions.begin(), conditions.end(), [](const auto& c) { return c.second; }));
}

namespace {

enum class Kind { kThink, kQuestion, kAnswer, kVerification };

constexpr std::array<std::pair<std::string_view, Kind>, 4> kTags = {{
    {"think", Kind::kThink},
    {"question", Kind::kQuestion},
    {"answer", Kind::kAnswer},
    {"verification", Kind::kVerification},
}};

struct Tag {
  Kind kind;
  bool closing;
  std::size_t begin;  // position of '<'
  std::size_t end;    // one past '>'
};

struct Block {
  Kind kind;
  std::string content;
  bool closed;
  std::size_t close_end;  // one past the closing tag, if closed
};

bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) !=
        std::tolower(static_cast<unsigned char>(b[i]))) {
      return false;
    }
  }
  return true;
}

// Recognizes <name>, </name> and <name > for the four known names.
std::vector<Tag> lex(std::string_view text) {
  std::vector<Tag> tags;
  std::size_t pos = 0;
  while ((pos = text.find('<', pos)) != std::string_view::npos) {
    std::size_t i = pos + 1;
    bool closing = false;
    if (i < text.size() && text[i] == '/') {
      closing = true;
      ++i;
    }
    const std::size_t name_begin = i;
    while (i < text.size() && std::isalpha(static_cast<unsigned char>(text[i]))) ++i;
    const auto name = text.substr(name_begin, i - name_begin);
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
    if (i < text.size() && text[i] == '>') {
      for (const auto& [tag_name, kind] : kTags) {
        if (iequals(name, tag_name)) {
          tags.push_back({kind, closing, pos, i + 1});
          break;
        }
      }
    }
    ++pos;
  }
  return tags;
}

bool well_nested(const std::vector<Tag>& tags) {
  if (tags.empty()) return false;
  std::vector<Kind> stack;
  for (const auto& t : tags) {
    if (!t.closing) {
      stack.push_back(t.kind);
    } else {
      if (stack.empty() || stack.back() != t.kind) return false;
      stack.pop_back();
    }
  }
  return stack.empty();
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

// Top-level blocks. With well-nested tags these are the depth-0 elements;
// otherwise each opening tag runs to the next closing tag of the same kind
// (or to end of input), and anything in between is swallowed.
std::vector<Block> extract_blocks(std::string_view text, const std::vector<Tag>& tags,
                                  bool nested_ok) {
  std::vector<Block> blocks;
  if (nested_ok) {
    std::size_t depth = 0;
    std::size_t open_index = 0;
    for (std::size_t i = 0; i < tags.size(); ++i) {
      if (!tags[i].closing) {
        if (depth++ == 0) open_index = i;
      } else if (--depth == 0) {
        const auto& o = tags[open_index];
        blocks.push_back({o.kind, trim(text.substr(o.end, tags[i].begin - o.end)), true,
                          tags[i].end});
      }
    }
    return blocks;
  }
  std::size_t i = 0;
  while (i < tags.size()) {
    if (tags[i].closing) {
      ++i;
      continue;
    }
    const auto& o = tags[i];
    std::size_t j = i + 1;
    while (j < tags.size() && !(tags[j].closing && tags[j].kind == o.kind)) ++j;
    if (j == tags.size()) {
      blocks.push_back({o.kind, trim(text.substr(o.end)), false, text.size()});
      break;
    }
    blocks.push_back({o.kind, trim(text.substr(o.end, tags[j].begin - o.end)), true,
                      tags[j].end});
    i = j + 1;
  }
  return blocks;
}

// Accepts light decoration around the label, e.g. "**Supported**" or
// "[Refuted]".
std::optional<Label> parse_verdict_label(std::string_view raw) {
  std::string s = trim(raw);
  auto decoration = [](char c) {
    return c == '*' || c == '_' || c == '[' || c == ']' || c == '(' || c == ')' ||
           c == '.' || c == ':' || c == '"' || c == '\'' || c == '`' ||
           std::isspace(static_cast<unsigned char>(c));
  };
  while (!s.empty() && decoration(s.front())) s.erase(s.begin());
  while (!s.empty() && decoration(s.back())) s.pop_back();
  return parse_label(s);
}

}  // namespace

ParseReport parse_trace(std::string_view text) {
  ParseReport report;
  for (std::size_t i = 0; i < kFormatConditionCount; ++i) {
    report.conditions[i] = {static_cast<FormatCondition>(i), false};
  }
  auto set = [&](FormatCondition c, bool v) {
    report.conditions[static_cast<std::size_t>(c)].second = v;
  };

  const auto tags = lex(text);
  const bool nested = well_nested(tags);
  const auto blocks = extract_blocks(text, tags, nested);

  std::size_t n_think = 0, n_question = 0, n_answer = 0, n_verification = 0;
  std::optional<std::size_t> first_think, first_question;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    switch (blocks[i].kind) {
      case Kind::kThink:
        ++n_think;
        if (!first_think) first_think = i;
        break;
      case Kind::kQuestion:
        ++n_question;
        if (!first_question) first_question = i;
        break;
      case Kind::kAnswer: ++n_answer; break;
      case Kind::kVerification: ++n_verification; break;
    }
  }

  // Question/answer subsequence must read Q A Q A ... Q A.
  std::vector<const Block*> qa;
  for (const auto& b : blocks) {
    if (b.kind == Kind::kQuestion || b.kind == Kind::kAnswer) qa.push_back(&b);
  }
  bool alternation = !qa.empty() && qa.size() % 2 == 0;
  for (std::size_t i = 0; alternation && i < qa.size(); ++i) {
    alternation = qa[i]->kind == (i % 2 == 0 ? Kind::kQuestion : Kind::kAnswer);
  }

  // Lenient cycles: a question directly followed (among Q/A blocks) by an
  // answer. Think blocks between an answer and the next question attach to
  // the preceding cycle.
  std::string initial_think;
  bool seen_question = false;
  for (std::size_t i = 0; i < blocks.size(); ++i) {
    const auto& b = blocks[i];
    if (b.kind == Kind::kThink) {
      if (!seen_question) {
        if (!initial_think.empty()) initial_think += "\n";
        initial_think += b.content;
      } else if (!report.partial_cycles.empty()) {
        auto& pt = report.partial_cycles.back().post_think;
        if (pt) {
          *pt += "\n";
          *pt += b.content;
        } else {
          pt = b.content;
        }
      }
    } else if (b.kind == Kind::kQuestion) {
      seen_question = true;
      std::size_t j = i + 1;
      while (j < blocks.size() && blocks[j].kind == Kind::kThink) ++j;
      // A stray think between question and answer is tolerated and dropped.
      if (j < blocks.size() && blocks[j].kind == Kind::kAnswer) {
        report.partial_cycles.push_back({b.content, blocks[j].content, std::nullopt});
        i = j;
      }
    }
  }

  const Block* last_verification = nullptr;
  for (const auto& b : blocks) {
    if (b.kind == Kind::kVerification) last_verification = &b;
  }
  if (last_verification) {
    report.raw_verdict_text = last_verification->content;
    report.partial_verdict = parse_verdict_label(last_verification->content);
  }

  set(FormatCondition::kThinkPresent, n_think > 0);
  set(FormatCondition::kThinkBeforeQuestion,
      first_think && (!first_question || *first_think < *first_question));
  set(FormatCondition::kQuestionPresent, n_question > 0);
  set(FormatCondition::kBalancedCounts, n_question > 0 && n_question == n_answer);
  set(FormatCondition::kAlternation, alternation);
  set(FormatCondition::kSingleVerification, n_verification == 1);
  set(FormatCondition::kValidVerdict, report.partial_verdict.has_value());
  set(FormatCondition::kWellNested, nested);
  set(FormatCondition::kNothingAfterVerdict,
      last_verification && last_verification->closed &&
          trim(text.substr(last_verification->close_end)).empty());
  set(FormatCondition::kMinTwoCycles, alternation && qa.size() / 2 >= 2);

  const bool cycles_nonempty =
      std::all_of(report.partial_cycles.begin(), report.partial_cycles.end(),
                  [](const Cycle& c) { return !c.question.empty() && !c.answer.empty(); });
  if (nested && alternation && report.partial_verdict && cycles_nonempty &&
      report.partial_cycles.size() == qa.size() / 2) {
    report.trace = Trace{initial_think, report.partial_cycles, *report.partial_verdict};
  }
  return report;
}

std::string render_trace(const Trace& trace) {
  std::string out;
  auto block = [&](std::string_view tag, std::string_view body) {
    out += '<';
    out += tag;
    out += ">\n";
    out += body;
    out += "\n</";
    out += tag;
    out += ">\n\n";
  };
  block("think", trace.initial_think);
  for (const auto& c : trace.cycles) {
    block("question", c.question);
    block("answer", c.answer);
    if (c.post_think) block("think", *c.post_think);
  }
  out += "<verification>\n";
  out += to_string(trace.verdict);
  out += "\n</verification>";
  return out;
}

bool is_abstention(std::string_view answer) {
  std::string s;
  s.reserve(answer.size());
  for (std::size_t i = 0; i < answer.size(); ++i) {
    // Typographic apostrophe U+2019 (E2 80 99) counts as '.
    if (i + 2 < answer.size() && static_cast<unsigned char>(answer[i]) == 0xE2 &&
        static_cast<unsigned char>(answer[i + 1]) == 0x80 &&
        static_cast<unsigned char>(answer[i + 2]) == 0x99) {
      s += '\'';
      i += 2;
      continue;
    }
    s += static_cast<char>(std::tolower(static_cast<unsigned char>(answer[i])));
  }
  return s.find("i don't know") != std::string::npos ||
         s.find("i do not know") != std::string::npos;
}

}  // namespace claimforge

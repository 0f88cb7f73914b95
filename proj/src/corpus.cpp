#include "claimforge/corpus.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <set>
#include <unordered_set>

#include "claimforge/error.hpp"
#include "claimforge/io.hpp"

namespace claimforge {

using nlohmann::json;

std::string_view to_string(Label label) {
  return label == Label::kSupported ? "Supported" : "Refuted";
}

namespace {

std::string trim_lower(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  std::string out(s.substr(b, e - b + 1));
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::optional<Label> parse_label(std::string_view text) {
  const std::string t = trim_lower(text);
  if (t == "supported") return Label::kSupported;
  if (t == "refuted") return Label::kRefuted;
  return std::nullopt;
}

std::string ClaimRecord::evidence_text() const {
  std::string out;
  for (std::size_t i = 0; i < evidence.size(); ++i) {
    if (i) out += "\n\n";
    out += evidence[i];
  }
  return out;
}

LabelMap::LabelMap(const std::unordered_map<std::string, Label>& entries) {
  for (const auto& [k, v] : entries) set(k, v);
}

LabelMap LabelMap::defaults() {
  LabelMap m;
  for (const char* s : {"supported", "supports", "support", "true",
                        "entailment", "entailed", "entails"}) {
    m.set(s, Label::kSupported);
  }
  for (const char* s : {"refuted", "refutes", "refute", "false",
                        "contradiction", "contradicted", "contradicts",
                        "unsupported", "not_supported", "not supported"}) {
    m.set(s, Label::kRefuted);
  }
  return m;
}

LabelMap LabelMap::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("label_map must be an object");
  LabelMap m;
  for (const auto& [k, v] : j.items()) {
    if (!v.is_string()) throw ConfigError("label_map." + k + " must be a string");
    auto label = parse_label(v.get<std::string>());
    if (!label) {
      throw ConfigError("label_map." + k + " must map to Supported or Refuted");
    }
    m.set(k, *label);
  }
  return m;
}

void LabelMap::set(std::string_view native, Label label) {
  entries_[trim_lower(native)] = label;
}

std::optional<Label> LabelMap::lookup(std::string_view native) const {
  auto it = entries_.find(trim_lower(native));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

ClaimRecord parse_claim_line(std::string_view line, std::size_t line_no,
                             const LabelMap& label_map) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw InputError(std::string("malformed JSON: ") + e.what(), line_no);
  }
  if (!j.is_object()) throw InputError("expected a JSON object", line_no);

  auto require_string = [&](const char* key) -> std::string {
    auto it = j.find(key);
    if (it == j.end()) throw InputError(std::string("missing field \"") + key + "\"", line_no);
    if (!it->is_string()) {
      throw InputError(std::string("field \"") + key + "\" must be a string", line_no);
    }
    return it->get<std::string>();
  };

  ClaimRecord r;
  r.id = require_string("id");
  if (r.id.empty()) throw InputError("field \"id\" is empty", line_no);
  r.claim = require_string("claim");
  r.source = require_string("source");

  auto ev = j.find("evidence");
  if (ev == j.end()) throw InputError("missing field \"evidence\"", line_no);
  if (!ev->is_array()) throw InputError("field \"evidence\" must be an array", line_no);
  for (const auto& p : *ev) {
    if (!p.is_string()) throw InputError("evidence passages must be strings", line_no);
    r.evidence.push_back(p.get<std::string>());
  }

  if (auto lab = j.find("label"); lab != j.end() && !lab->is_null()) {
    if (!lab->is_string()) throw InputError("field \"label\" must be a string or null", line_no);
    const auto native = lab->get<std::string>();
    auto mapped = label_map.lookup(native);
    if (!mapped) throw InputError("unknown label \"" + native + "\"", line_no);
    r.label = *mapped;
  }

  if (auto n = j.find("silver_question_count"); n != j.end() && !n->is_null()) {
    if (!n->is_number_integer() || n->get<long long>() < 1) {
      throw InputError("silver_question_count must be a positive integer", line_no);
    }
    r.silver_question_count = n->get<int>();
  }

  if (auto meta = j.find("meta"); meta != j.end() && !meta->is_null()) {
    if (!meta->is_object()) throw InputError("field \"meta\" must be an object", line_no);
    for (const auto& [k, v] : meta->items()) {
      r.meta[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
  }
  return r;
}

std::vector<ClaimRecord> ingest_claims(const std::filesystem::path& path,
                                       const LabelMap& label_map) {
  const auto lines = read_lines(path);
  std::vector<ClaimRecord> out;
  std::unordered_set<std::string> seen;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_blank(lines[i])) continue;
    auto r = parse_claim_line(lines[i], i + 1, label_map);
    if (!seen.insert(r.id).second) {
      throw InputError("duplicate id \"" + r.id + "\"", i + 1);
    }
    out.push_back(std::move(r));
  }
  return out;
}

json to_json(const ClaimRecord& r) {
  json j;
  j["id"] = r.id;
  j["claim"] = r.claim;
  j["evidence"] = r.evidence;
  j["label"] = r.label ? json(std::string(to_string(*r.label))) : json(nullptr);
  j["source"] = r.source;
  if (!r.meta.empty()) j["meta"] = r.meta;
  if (r.silver_question_count) j["silver_question_count"] = *r.silver_question_count;
  return j;
}

std::string to_jsonl(const std::vector<ClaimRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += to_json(r).dump();
    out += '\n';
  }
  return out;
}

// ---- tokenizer --------------------------------------------------------------

namespace {

// Decodes one UTF-8 code point starting at s[i]; advances i. Invalid bytes
// decode as themselves so that tokenization never fails.
char32_t decode_utf8(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) -> int {
    if (i + k >= s.size()) return -1;
    const auto b = static_cast<unsigned char>(s[i + k]);
    return (b & 0xC0) == 0x80 ? (b & 0x3F) : -1;
  };
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  if ((b0 & 0xE0) == 0xC0) {
    const int c1 = cont(1);
    if (c1 >= 0) {
      i += 2;
      return static_cast<char32_t>(((b0 & 0x1F) << 6) | c1);
    }
  } else if ((b0 & 0xF0) == 0xE0) {
    const int c1 = cont(1), c2 = cont(2);
    if (c1 >= 0 && c2 >= 0) {
      i += 3;
      return static_cast<char32_t>(((b0 & 0x0F) << 12) | (c1 << 6) | c2);
    }
  } else if ((b0 & 0xF8) == 0xF0) {
    const int c1 = cont(1), c2 = cont(2), c3 = cont(3);
    if (c1 >= 0 && c2 >= 0 && c3 >= 0) {
      i += 4;
      return static_cast<char32_t>(((b0 & 0x07) << 18) | (c1 << 12) | (c2 << 6) | c3);
    }
  }
  ++i;
  return b0;
}

bool is_space(char32_t c) {
  switch (c) {
    case 0x09: case 0x0A: case 0x0B: case 0x0C: case 0x0D: case 0x20:
    case 0x85: case 0xA0: case 0x1680: case 0x2028: case 0x2029:
    case 0x202F: case 0x205F: case 0x3000:
      return true;
    default:
      return c >= 0x2000 && c <= 0x200A;
  }
}

bool is_punct(char32_t c) {
  if (c < 0x80) return std::ispunct(static_cast<int>(c)) != 0;
  switch (c) {
    case 0xA1: case 0xAB: case 0xB7: case 0xBB: case 0xBF:
    case 0x3001: case 0x3002: case 0x300C: case 0x300D:
      return true;
    default:
      return (c >= 0x2010 && c <= 0x2027) || (c >= 0x2030 && c <= 0x205E);
  }
}

struct CodePoint {
  char32_t value;
  std::size_t begin;
  std::size_t end;
};

// Strips punctuation code points from both ends of piece [b, e).
std::string_view strip_punct(std::string_view text, std::size_t b, std::size_t e) {
  std::vector<CodePoint> cps;
  for (std::size_t i = b; i < e;) {
    const std::size_t start = i;
    const char32_t c = decode_utf8(text.substr(0, e), i);
    cps.push_back({c, start, i});
  }
  std::size_t lo = 0, hi = cps.size();
  while (lo < hi && is_punct(cps[lo].value)) ++lo;
  while (hi > lo && is_punct(cps[hi - 1].value)) --hi;
  if (lo == hi) return {};
  return text.substr(cps[lo].begin, cps[hi - 1].end - cps[lo].begin);
}

struct RawPiece {
  std::size_t begin;
  std::size_t end;
};

std::vector<RawPiece> split_whitespace(std::string_view text) {
  std::vector<RawPiece> pieces;
  std::size_t i = 0;
  std::size_t start = std::string_view::npos;
  while (i < text.size()) {
    const std::size_t at = i;
    const char32_t c = decode_utf8(text, i);
    if (is_space(c)) {
      if (start != std::string_view::npos) pieces.push_back({start, at});
      start = std::string_view::npos;
    } else if (start == std::string_view::npos) {
      start = at;
    }
  }
  if (start != std::string_view::npos) pieces.push_back({start, text.size()});
  return pieces;
}

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

}  // namespace

std::vector<std::string_view> tokenize(std::string_view text) {
  std::vector<std::string_view> tokens;
  for (const auto& p : split_whitespace(text)) {
    auto t = strip_punct(text, p.begin, p.end);
    if (!t.empty()) tokens.push_back(t);
  }
  return tokens;
}

TokenCount count_tokens(std::string_view text) { return {tokenize(text).size()}; }

bool is_stopword(std::string_view w) {
  static const std::unordered_set<std::string_view> kStop = {
      "a",     "an",    "the",   "and",   "or",    "but",   "if",    "of",
      "in",    "on",    "at",    "to",    "for",   "from",  "by",    "with",
      "as",    "is",    "are",   "was",   "were",  "be",    "been",  "being",
      "am",    "do",    "does",  "did",   "has",   "have",  "had",   "it",
      "its",   "this",  "that",  "these", "those", "he",    "she",   "they",
      "them",  "his",   "her",   "their", "we",    "you",   "i",     "me",
      "my",    "our",   "your",  "not",   "no",    "so",    "than",  "then",
      "there", "which", "who",   "whom",  "what",  "when",  "where", "why",
      "how",   "all",   "any",   "both",  "each",  "can",   "will",  "would",
      "should", "could", "may",  "might", "also",  "into",  "about", "over",
      "after", "before", "such", "only",  "own",   "same",  "other", "more",
      "most",  "some",  "very",  "just",  "s",     "t"};
  return kStop.contains(w);
}

double lexical_overlap(std::string_view claim, std::string_view evidence) {
  std::set<std::string> all, content;
  for (auto t : tokenize(claim)) {
    auto w = lower_ascii(t);
    if (!is_stopword(w)) content.insert(w);
    all.insert(std::move(w));
  }
  const auto& probe = content.empty() ? all : content;
  if (probe.empty()) return 1.0;
  std::unordered_set<std::string> ev;
  for (auto t : tokenize(evidence)) ev.insert(lower_ascii(t));
  std::size_t hit = 0;
  for (const auto& w : probe) hit += ev.contains(w);
  return static_cast<double>(hit) / static_cast<double>(probe.size());
}

// ---- entities ---------------------------------------------------------------

namespace {

bool starts_upper(std::string_view core) {
  if (core.empty()) return false;
  const auto b0 = static_cast<unsigned char>(core[0]);
  if (b0 < 0x80) return std::isupper(b0) != 0;
  // Latin-1 supplement capitals (U+00C0..U+00DE, excluding U+00D7).
  if (b0 == 0xC3 && core.size() > 1) {
    const auto b1 = static_cast<unsigned char>(core[1]);
    return b1 >= 0x80 && b1 <= 0x9E && b1 != 0x97;
  }
  return false;
}

// The raw piece ends a sentence if, ignoring closing quotes and brackets,
// its last character is . ! or ?
bool ends_sentence(std::string_view raw) {
  std::size_t n = raw.size();
  while (n > 0 && (raw[n - 1] == '"' || raw[n - 1] == '\'' || raw[n - 1] == ')' ||
                   raw[n - 1] == ']')) {
    --n;
  }
  return n > 0 && (raw[n - 1] == '.' || raw[n - 1] == '!' || raw[n - 1] == '?');
}

// Trailing punctuation other than hyphen/apostrophe breaks a capitalized run.
bool breaks_run(std::string_view raw, std::string_view core) {
  const auto core_end = static_cast<std::size_t>(core.data() + core.size() - raw.data());
  return core_end < raw.size();
}

}  // namespace

std::vector<std::string> HeuristicEntityCounter::entities(std::string_view text) const {
  std::vector<std::string> out;
  std::vector<std::string_view> run;
  bool run_starts_sentence = false;
  auto flush = [&] {
    if (!run.empty() && !(run.size() == 1 && run_starts_sentence)) {
      std::string span;
      for (std::size_t i = 0; i < run.size(); ++i) {
        if (i) span += ' ';
        span += run[i];
      }
      out.push_back(std::move(span));
    }
    run.clear();
  };

  bool sentence_initial = true;
  for (const auto& p : split_whitespace(text)) {
    const auto raw = text.substr(p.begin, p.end - p.begin);
    const auto core = strip_punct(text, p.begin, p.end);
    const bool leading_punct = !core.empty() && core.data() != raw.data();
    if (starts_upper(core)) {
      if (leading_punct) flush();
      if (run.empty()) run_starts_sentence = sentence_initial;
      run.push_back(core);
      if (breaks_run(raw, core)) flush();
    } else {
      flush();
    }
    if (!core.empty() || !raw.empty()) sentence_initial = ends_sentence(raw);
  }
  flush();
  return out;
}

UnionEntityCounter::UnionEntityCounter(
    std::vector<std::shared_ptr<const EntityCounter>> members)
    : members_(std::move(members)) {}

std::vector<std::string> UnionEntityCounter::entities(std::string_view text) const {
  std::set<std::string> spans;
  std::vector<std::string> out;
  for (const auto& m : members_) {
    for (auto& e : m->entities(text)) {
      if (spans.insert(e).second) out.push_back(std::move(e));
    }
  }
  return out;
}

std::size_t entity_count(std::string_view claim, const EntityCounter& ner) {
  std::set<std::string> distinct;
  for (auto& e : ner.entities(claim)) {
    const auto b = e.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) continue;
    const auto en = e.find_last_not_of(" \t\r\n");
    distinct.insert(e.substr(b, en - b + 1));
  }
  return distinct.size();
}

}  // namespace claimforge

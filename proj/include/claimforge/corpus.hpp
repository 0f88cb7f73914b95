#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "json.hpp"

namespace claimforge {

enum class Label { kSupported, kRefuted };

std::string_view to_string(Label label);

// Accepts "Supported"/"Refuted" in any case; nullopt otherwise.
std::optional<Label> parse_label(std::string_view text);

struct ClaimRecord {
  std::string id;
  std::string claim;
  std::vector<std::string> evidence;
  std::optional<Label> label;
  std::string source;
  std::optional<int> silver_question_count;  // n*, >= 1 when present
  std::map<std::string, std::string> meta;

  // Passages joined with blank lines; this is the document judges see.
  std::string evidence_text() const;

  bool operator==(const ClaimRecord&) const = default;
};

// Maps native corpus verdict strings onto the two-way scheme. Keys are
// matched after trimming and lower-casing.
class LabelMap {
 public:
  LabelMap() = default;
  explicit LabelMap(const std::unordered_map<std::string, Label>& entries);

  // supported/refuted/true/false/entailment/contradiction and close variants.
  static LabelMap defaults();
  static LabelMap from_json(const nlohmann::json& j);

  void set(std::string_view native, Label label);
  std::optional<Label> lookup(std::string_view native) const;

 private:
  std::unordered_map<std::string, Label> entries_;
};

// Reads claims JSONL. Records are returned in file order. Blank lines are
// skipped. Throws InputError carrying the 1-based line number for malformed
// lines, duplicate ids and unmapped labels.
std::vector<ClaimRecord> ingest_claims(const std::filesystem::path& path,
                                       const LabelMap& label_map);

ClaimRecord parse_claim_line(std::string_view line, std::size_t line_no,
                             const LabelMap& label_map);

nlohmann::json to_json(const ClaimRecord& record);
std::string to_jsonl(const std::vector<ClaimRecord>& records);

// ---- text statistics -------------------------------------------------------

struct TokenCount {
  std::size_t count = 0;
  bool operator==(const TokenCount&) const = default;
};

// Splits on Unicode whitespace and strips leading/trailing punctuation from
// each piece; every non-empty residue is a token. Views point into `text`.
std::vector<std::string_view> tokenize(std::string_view text);

TokenCount count_tokens(std::string_view text);

// Fraction of the claim's distinct content tokens (lower-cased, stopwords
// removed) that occur in the evidence. A claim whose tokens are all
// stopwords falls back to its full token set; a claim with no tokens at all
// is vacuously contained and scores 1.
double lexical_overlap(std::string_view claim, std::string_view evidence);

bool is_stopword(std::string_view lowered_token);

// ---- named entities --------------------------------------------------------

class EntityCounter {
 public:
  virtual ~EntityCounter() = default;
  // Entity surface strings found in `text`. Implementations backed by a
  // remote service throw TransportError when it is unreachable.
  virtual std::vector<std::string> entities(std::string_view text) const = 0;
};

// Runs of capitalized tokens. A run that is a single sentence-initial word
// is not counted ("This is true." has no entities).
class HeuristicEntityCounter final : public EntityCounter {
 public:
  std::vector<std::string> entities(std::string_view text) const override;
};

// Union of the spans reported by several counters.
class UnionEntityCounter final : public EntityCounter {
 public:
  explicit UnionEntityCounter(
      std::vector<std::shared_ptr<const EntityCounter>> members);
  std::vector<std::string> entities(std::string_view text) const override;

 private:
  std::vector<std::shared_ptr<const EntityCounter>> members_;
};

// Number of distinct entity spans the counter reports for `claim`.
std::size_t entity_count(std::string_view claim, const EntityCounter& ner);

}  // namespace claimforge

#pragma once

// Curation funnel: rule and difficulty filters, near-duplicate removal,
// holdout decontamination, silver-decomposition gating, label/source
// stratified selection and long-evidence augmentation.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "claimforge/backends.hpp"
#include "claimforge/corpus.hpp"
#include "json.hpp"

namespace claimforge {

// ---- shingles and MinHash ------------------------------------------------------

inline constexpr std::size_t kMinHashPermutations = 128;
inline constexpr std::size_t kLshBands = 16;
inline constexpr std::size_t kLshRows = 8;
static_assert(kLshBands * kLshRows == kMinHashPermutations);

inline constexpr std::uint64_t kDefaultMinHashSeed = 0x5eed0f5b1e7d0c11ULL;

// Sorted, de-duplicated 64-bit hashes of lower-cased 3-token windows. Texts
// with one or two tokens get a single shingle for the whole token sequence;
// a text without tokens has an empty set.
struct ShingleSet {
  std::vector<std::uint64_t> hashes;
  bool operator==(const ShingleSet&) const = default;
};

ShingleSet shingles(std::string_view text);

// |A ∩ B| / |A ∪ B|; 0 when both are empty.
double exact_jaccard(const ShingleSet& a, const ShingleSet& b);

using MinHashSignature = std::vector<std::uint32_t>;

MinHashSignature minhash_signature(const ShingleSet& s,
                                   std::uint64_t seed = kDefaultMinHashSeed);

// Fraction of agreeing positions.
double estimate_jaccard(const MinHashSignature& a, const MinHashSignature& b);

// ---- stage results -----------------------------------------------------------

struct Rejection {
  std::string id;
  std::string reason;
  std::string detail;  // e.g. the id of the record it duplicates
};

struct StageResult {
  std::vector<ClaimRecord> kept;
  std::vector<Rejection> rejected;
};

// ---- filters -----------------------------------------------------------------

struct RuleThresholds {
  std::size_t min_passages = 3;
  std::size_t min_evidence_tokens = 200;
  std::size_t max_evidence_tokens = 10000;
  double max_lexical_overlap = 0.9;  // rejected when overlap exceeds this
  std::size_t min_entities = 2;
};

// Reasons, checked in this order: too-few-passages, too-short, too-long,
// high-overlap, too-few-entities. Token bounds apply to the concatenated
// evidence.
StageResult rule_filter(const std::vector<ClaimRecord>& records, const RuleThresholds& t,
                        const EntityCounter& ner, unsigned workers = 1);

struct DifficultyBand {
  double low = 0.3;
  double high = 0.8;
};

// Keeps low <= p <= high, p being the verifier's probability of the gold
// label. Reason: outside-difficulty-band.
StageResult difficulty_filter(const std::vector<ClaimRecord>& records, Verifier& verifier,
                              const DifficultyBand& band = {}, unsigned workers = 1);

struct DedupOptions {
  double jaccard_threshold = 0.7;
  // LSH banding alone misses a sizeable share of pairs just above the
  // threshold. With exact recall on, a prefix-filter index adds the
  // remaining candidates so no pair at or above the threshold survives.
  bool exact_recall = true;
  std::uint64_t seed = kDefaultMinHashSeed;
  unsigned workers = 1;
};

// Greedy in input order: a record is dropped when its exact shingle
// Jaccard with an earlier kept record reaches the threshold. Reason:
// minhash-duplicate.
StageResult dedup_minhash(const std::vector<ClaimRecord>& records, const DedupOptions& opt = {});

// Greedy in input order on claim embeddings. Reason: semantic-duplicate.
StageResult dedup_semantic(const std::vector<ClaimRecord>& records, Embedder& embedder,
                           double cosine_threshold = 0.70, unsigned workers = 1);

struct DecontaminationOptions {
  double jaccard_threshold = 0.7;
  double cosine_threshold = 0.90;
  unsigned workers = 1;
};

// Drops train records that match any holdout claim. Reasons:
// holdout-minhash, holdout-semantic.
StageResult decontaminate(const std::vector<ClaimRecord>& train,
                          const std::vector<ClaimRecord>& holdout, Embedder& embedder,
                          const DecontaminationOptions& opt = {});

// Asks the generator for the decomposition questions; the count becomes
// silver_question_count. Throws ParseError when no question can be read.
ClaimRecord silver_decompose(const ClaimRecord& record, JudgeClient& generator);

// Decomposes records that lack a count, then keeps those with at least
// `min_questions`. Reasons: silver-unparsable, silver-too-few-questions.
StageResult silver_filter(const std::vector<ClaimRecord>& records, JudgeClient& generator,
                          int min_questions = 2, unsigned workers = 1);

// ---- selection -----------------------------------------------------------------

struct Cell {
  Label label;
  std::string source;
  auto operator<=>(const Cell&) const = default;
};

struct SelectionBudget {
  std::map<Cell, std::size_t> cells;
  std::size_t total = 0;
};

// Splits `budget` over items proportionally to sqrt(size), never giving an
// item more than its size: shares are capped and the surplus re-spread, then
// rounded by largest remainder with ties going to the earlier name.
std::vector<std::size_t> sqrt_allocation(const std::vector<std::size_t>& sizes,
                                         const std::vector<std::string>& names,
                                         std::size_t budget);

// Supported gets ceil(total / 2) and Refuted floor(total / 2); each half is
// spread over that label's sources with sqrt_allocation. Throws InputError
// when the total or a label half exceeds what the pool holds.
SelectionBudget allocate_budgets(const std::vector<ClaimRecord>& pool, std::size_t total);

// Row-major n x n cosine similarities.
struct SimilarityMatrix {
  std::size_t n = 0;
  std::vector<double> values;
  double operator()(std::size_t i, std::size_t j) const { return values[i * n + j]; }
  const double* row(std::size_t i) const { return values.data() + i * n; }
};

SimilarityMatrix similarity_matrix(const std::vector<Embedding>& unit_vectors,
                                   unsigned workers = 1);

// f(S) = sum_i max(0, max_{j in S} sim(i, j)); f(empty) = 0.
double facility_location_value(const SimilarityMatrix& sim, const std::vector<std::size_t>& s);

// Greedy maximization of f. Equal gains go to the lower tie_rank. `lazy`
// selects the priority-queue variant, which returns the same sequence.
// Returns indices in selection order; `gains`, when given, receives each
// step's marginal gain.
std::vector<std::size_t> facility_location_greedy(const SimilarityMatrix& sim,
                                                  const std::vector<std::size_t>& tie_rank,
                                                  std::size_t k, bool lazy = true,
                                                  std::vector<double>* gains = nullptr);

// Starts from the point with the largest total similarity, then repeatedly
// adds the point whose minimum cosine distance to the chosen set is largest.
std::vector<std::size_t> farthest_point_select(const SimilarityMatrix& sim,
                                               const std::vector<std::size_t>& tie_rank,
                                               std::size_t k);

// k distinct indices of [0, n) drawn uniformly with a seeded generator.
std::vector<std::size_t> random_select(std::size_t n, std::size_t k, std::uint64_t seed);

// Rank of each id in lexicographic order.
std::vector<std::size_t> id_ranks(const std::vector<std::string>& ids);

enum class Selector { kFacilityLocation, kFarthestPoint, kRandom };

std::string_view to_string(Selector s);
Selector selector_from_name(std::string_view name);

// Selects within each (label, source) cell; returns records in pool order.
std::vector<ClaimRecord> select_records(const std::vector<ClaimRecord>& pool,
                                        const SelectionBudget& budget, Selector selector,
                                        Embedder* embedder, std::uint64_t seed,
                                        unsigned workers = 1);

// Appends, in pool order, every unselected pool record whose evidence has at
// least `min_tokens` tokens.
std::vector<ClaimRecord> long_evidence_augment(const std::vector<ClaimRecord>& pool,
                                               const std::vector<ClaimRecord>& selected,
                                               std::size_t min_tokens = 3000);

// ---- report --------------------------------------------------------------------

struct StageStats {
  std::string name;
  std::size_t input = 0;
  std::size_t output = 0;
  std::map<std::string, std::size_t> reasons;  // rejection reason -> count
  bool additive = false;  // stages that only add records (augmentation)

  bool operator==(const StageStats&) const = default;
};

struct FunnelReport {
  std::vector<StageStats> stages;
  bool operator==(const FunnelReport&) const = default;
};

nlohmann::json to_json(const FunnelReport& report);
FunnelReport report_from_json(const nlohmann::json& j);

// ---- whole run -----------------------------------------------------------------

struct FunnelThresholds {
  RuleThresholds rule;
  DifficultyBand difficulty;
  double minhash_jaccard = 0.7;
  double semantic_cosine = 0.70;
  double decontam_jaccard = 0.7;
  double decontam_cosine = 0.90;
  int min_silver_questions = 2;
  std::size_t long_evidence_tokens = 3000;
};

struct FunnelConfig {
  std::filesystem::path base_dir;
  std::vector<std::filesystem::path> inputs;
  std::vector<std::filesystem::path> holdouts;
  LabelMap label_map = LabelMap::defaults();
  FunnelThresholds thresholds;
  std::size_t budget = 0;
  std::uint64_t seed = 42;
  Selector selector = Selector::kFacilityLocation;
  bool exact_recall = true;
  std::optional<std::filesystem::path> cache_dir;
  std::filesystem::path output_dir;
  nlohmann::json backends = nlohmann::json::object();
  std::map<TemplateId, int> max_tokens;
};

// Relative paths resolve against the config file's directory.
FunnelConfig load_funnel_config(const std::filesystem::path& path);
FunnelConfig parse_funnel_config(const nlohmann::json& j, const std::filesystem::path& base_dir);

// Backends built from a config's "backends" section. `fixtures`, when set,
// puts every backend in fixture mode on that file. Endpoint URLs can be
// overridden by CLAIMFORGE_{JUDGE,EMBEDDER,VERIFIER,NER}_URL.
struct BackendSet {
  std::shared_ptr<ResponseCache> cache;
  std::shared_ptr<JudgeClient> judge;
  std::shared_ptr<Embedder> embedder;
  std::shared_ptr<Verifier> verifier;
  std::shared_ptr<const EntityCounter> ner;
};

BackendSet make_backends(const nlohmann::json& section, const std::filesystem::path& base_dir,
                         const std::optional<std::filesystem::path>& cache_dir,
                         const std::optional<std::filesystem::path>& fixtures,
                         const std::map<TemplateId, int>& max_tokens = {}, unsigned workers = 1);

struct FunnelOptions {
  unsigned workers = 1;
  std::optional<std::filesystem::path> fixtures;
  std::optional<std::filesystem::path> cache_dir;  // overrides the config
  std::optional<std::uint64_t> seed;                // overrides the config
};

struct FunnelOutput {
  std::vector<ClaimRecord> records;
  FunnelReport report;
  std::vector<std::pair<std::string, Rejection>> rejections;  // (stage, rejection)
};

// Runs every stage in order. A failure is rethrown as a StageError naming
// the stage; nothing is written by this function.
FunnelOutput run_funnel(const FunnelConfig& config, const FunnelOptions& options = {});

// Writes curated.jsonl, report.json and rejections.jsonl to `dir`, each
// atomically.
void write_funnel_output(const FunnelOutput& out, const std::filesystem::path& dir);

}  // namespace claimforge

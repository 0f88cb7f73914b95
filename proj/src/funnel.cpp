#include "claimforge/funnel.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "claimforge/error.hpp"
#include "claimforge/hash.hpp"
#include "claimforge/parallel.hpp"
#include "claimforge/prompts.hpp"
#include "claimforge/simd/kernels.hpp"

namespace claimforge {

using nlohmann::json;

namespace {

std::string lower_ascii(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::uint32_t fold32(std::uint64_t h) { return static_cast<std::uint32_t>(h ^ (h >> 32)); }

std::vector<std::uint32_t> permutation_seeds(std::uint64_t seed) {
  std::vector<std::uint32_t> seeds(kMinHashPermutations);
  for (std::size_t p = 0; p < kMinHashPermutations; ++p) {
    seeds[p] = static_cast<std::uint32_t>(splitmix64(seed + p));
  }
  return seeds;
}

// Number of leading (smallest) hashes that must be indexed so that any two
// sets with Jaccard >= t share at least one indexed hash.
std::size_t prefix_length(std::size_t size, double t) {
  if (size == 0) return 0;
  const auto required = static_cast<std::size_t>(std::ceil(t * static_cast<double>(size) - 1e-9));
  return size - std::min(size, std::max<std::size_t>(required, 1)) + 1;
}

// Inverted index over the prefix hashes of a growing set of records.
class PrefixIndex {
 public:
  explicit PrefixIndex(double t) : t_(t) {}

  void add(std::size_t id, const ShingleSet& s) {
    const std::size_t p = prefix_length(s.hashes.size(), t_);
    for (std::size_t i = 0; i < p; ++i) postings_[s.hashes[i]].push_back(id);
  }

  void probe(const ShingleSet& s, std::vector<std::size_t>& out) const {
    const std::size_t p = prefix_length(s.hashes.size(), t_);
    for (std::size_t i = 0; i < p; ++i) {
      auto it = postings_.find(s.hashes[i]);
      if (it != postings_.end()) out.insert(out.end(), it->second.begin(), it->second.end());
    }
  }

 private:
  double t_;
  std::unordered_map<std::uint64_t, std::vector<std::size_t>> postings_;
};

std::uint64_t band_hash(const MinHashSignature& sig, std::size_t band) {
  std::uint64_t h = splitmix64(band + 1);
  for (std::size_t r = 0; r < kLshRows; ++r) {
    h = splitmix64(h ^ sig[band * kLshRows + r]);
  }
  return h;
}

void sort_unique(std::vector<std::size_t>& v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
}

std::vector<ShingleSet> all_shingles(const std::vector<ClaimRecord>& records, unsigned workers) {
  std::vector<ShingleSet> out(records.size());
  parallel_for(records.size(), workers, [&](std::size_t i) { out[i] = shingles(records[i].claim); });
  return out;
}

std::vector<std::string> claims_of(const std::vector<ClaimRecord>& records) {
  std::vector<std::string> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.claim);
  return out;
}

}  // namespace

// ---- shingles and MinHash ------------------------------------------------------

ShingleSet shingles(std::string_view text) {
  const auto tokens = tokenize(text);
  ShingleSet out;
  if (tokens.empty()) return out;
  std::vector<std::string> lowered;
  lowered.reserve(tokens.size());
  for (auto t : tokens) lowered.push_back(lower_ascii(t));
  const std::size_t width = std::min<std::size_t>(3, lowered.size());
  for (std::size_t i = 0; i + width <= lowered.size(); ++i) {
    std::string window = lowered[i];
    for (std::size_t k = 1; k < width; ++k) window += ' ' + lowered[i + k];
    out.hashes.push_back(splitmix64(fnv1a64(window)));
  }
  std::sort(out.hashes.begin(), out.hashes.end());
  out.hashes.erase(std::unique(out.hashes.begin(), out.hashes.end()), out.hashes.end());
  return out;
}

double exact_jaccard(const ShingleSet& a, const ShingleSet& b) {
  if (a.hashes.empty() && b.hashes.empty()) return 0.0;
  std::size_t inter = 0, i = 0, j = 0;
  while (i < a.hashes.size() && j < b.hashes.size()) {
    if (a.hashes[i] < b.hashes[j]) ++i;
    else if (b.hashes[j] < a.hashes[i]) ++j;
    else { ++inter; ++i; ++j; }
  }
  const std::size_t uni = a.hashes.size() + b.hashes.size() - inter;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

MinHashSignature minhash_signature(const ShingleSet& s, std::uint64_t seed) {
  static thread_local std::uint64_t cached_seed = ~seed;
  static thread_local std::vector<std::uint32_t> seeds;
  if (cached_seed != seed || seeds.empty()) {
    seeds = permutation_seeds(seed);
    cached_seed = seed;
  }
  std::vector<std::uint32_t> folded(s.hashes.size());
  for (std::size_t i = 0; i < folded.size(); ++i) folded[i] = fold32(s.hashes[i]);
  MinHashSignature sig(kMinHashPermutations, std::numeric_limits<std::uint32_t>::max());
  simd::minhash(folded, seeds, sig);
  return sig;
}

double estimate_jaccard(const MinHashSignature& a, const MinHashSignature& b) {
  if (a.size() != b.size() || a.empty()) {
    throw InputError("MinHash signatures must have equal, non-zero length");
  }
  return static_cast<double>(simd::count_equal(a, b)) / static_cast<double>(a.size());
}

// ---- filters -----------------------------------------------------------------

StageResult rule_filter(const std::vector<ClaimRecord>& records, const RuleThresholds& t,
                        const EntityCounter& ner, unsigned workers) {
  std::vector<std::string> reason(records.size());
  parallel_for(records.size(), workers, [&](std::size_t i) {
    const ClaimRecord& r = records[i];
    if (r.evidence.size() < t.min_passages) {
      reason[i] = "too-few-passages";
      return;
    }
    const std::string evidence = r.evidence_text();
    const std::size_t tokens = count_tokens(evidence).count;
    if (tokens < t.min_evidence_tokens) {
      reason[i] = "too-short";
    } else if (tokens > t.max_evidence_tokens) {
      reason[i] = "too-long";
    } else if (lexical_overlap(r.claim, evidence) > t.max_lexical_overlap) {
      reason[i] = "high-overlap";
    } else if (entity_count(r.claim, ner) < t.min_entities) {
      reason[i] = "too-few-entities";
    }
  });
  StageResult out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (reason[i].empty()) out.kept.push_back(records[i]);
    else out.rejected.push_back({records[i].id, reason[i], {}});
  }
  return out;
}

StageResult difficulty_filter(const std::vector<ClaimRecord>& records, Verifier& verifier,
                              const DifficultyBand& band, unsigned workers) {
  std::vector<double> p(records.size());
  parallel_for(records.size(), workers,
               [&](std::size_t i) { p[i] = difficulty_score(records[i], verifier); });
  StageResult out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (p[i] >= band.low && p[i] <= band.high) {
      out.kept.push_back(records[i]);
    } else {
      out.rejected.push_back({records[i].id, "outside-difficulty-band", std::to_string(p[i])});
    }
  }
  return out;
}

StageResult dedup_minhash(const std::vector<ClaimRecord>& records, const DedupOptions& opt) {
  const auto sets = all_shingles(records, opt.workers);
  std::vector<MinHashSignature> sigs(records.size());
  parallel_for(records.size(), opt.workers,
               [&](std::size_t i) { sigs[i] = minhash_signature(sets[i], opt.seed); });

  std::vector<std::unordered_map<std::uint64_t, std::vector<std::size_t>>> buckets(kLshBands);
  PrefixIndex prefix(opt.jaccard_threshold);
  StageResult out;
  std::vector<std::size_t> kept_index;  // record index of each kept record
  std::vector<std::size_t> candidates;
  for (std::size_t i = 0; i < records.size(); ++i) {
    candidates.clear();
    std::array<std::uint64_t, kLshBands> bands{};
    if (!sets[i].hashes.empty()) {
      for (std::size_t b = 0; b < kLshBands; ++b) {
        bands[b] = band_hash(sigs[i], b);
        auto it = buckets[b].find(bands[b]);
        if (it != buckets[b].end()) {
          candidates.insert(candidates.end(), it->second.begin(), it->second.end());
        }
      }
      if (opt.exact_recall) prefix.probe(sets[i], candidates);
    }
    sort_unique(candidates);
    std::optional<std::size_t> match;
    for (std::size_t k : candidates) {
      if (exact_jaccard(sets[i], sets[kept_index[k]]) >= opt.jaccard_threshold) {
        match = k;
        break;
      }
    }
    if (match) {
      out.rejected.push_back({records[i].id, "minhash-duplicate", records[kept_index[*match]].id});
      continue;
    }
    const std::size_t k = kept_index.size();
    kept_index.push_back(i);
    out.kept.push_back(records[i]);
    if (!sets[i].hashes.empty()) {
      for (std::size_t b = 0; b < kLshBands; ++b) buckets[b][bands[b]].push_back(k);
      if (opt.exact_recall) prefix.add(k, sets[i]);
    }
  }
  return out;
}

StageResult dedup_semantic(const std::vector<ClaimRecord>& records, Embedder& embedder,
                           double cosine_threshold, unsigned workers) {
  embedder.set_workers(workers);
  const auto emb = embedder.embed(claims_of(records));
  StageResult out;
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < records.size(); ++i) {
    std::optional<std::size_t> match;
    for (std::size_t k : kept) {
      if (cosine(emb[i], emb[k]) >= cosine_threshold) {
        match = k;
        break;
      }
    }
    if (match) {
      out.rejected.push_back({records[i].id, "semantic-duplicate", records[*match].id});
    } else {
      kept.push_back(i);
      out.kept.push_back(records[i]);
    }
  }
  return out;
}

StageResult decontaminate(const std::vector<ClaimRecord>& train,
                          const std::vector<ClaimRecord>& holdout, Embedder& embedder,
                          const DecontaminationOptions& opt) {
  if (holdout.empty()) throw InputError("decontamination needs at least one holdout claim");
  const auto train_sets = all_shingles(train, opt.workers);
  const auto hold_sets = all_shingles(holdout, opt.workers);
  PrefixIndex index(opt.jaccard_threshold);
  for (std::size_t h = 0; h < holdout.size(); ++h) index.add(h, hold_sets[h]);

  embedder.set_workers(opt.workers);
  const auto train_emb = embedder.embed(claims_of(train));
  const auto hold_emb = embedder.embed(claims_of(holdout));

  std::vector<Rejection> verdict(train.size());
  parallel_for(train.size(), opt.workers, [&](std::size_t i) {
    std::vector<std::size_t> candidates;
    index.probe(train_sets[i], candidates);
    sort_unique(candidates);
    for (std::size_t h : candidates) {
      if (exact_jaccard(train_sets[i], hold_sets[h]) >= opt.jaccard_threshold) {
        verdict[i] = {train[i].id, "holdout-minhash", holdout[h].id};
        return;
      }
    }
    for (std::size_t h = 0; h < holdout.size(); ++h) {
      if (cosine(train_emb[i], hold_emb[h]) >= opt.cosine_threshold) {
        verdict[i] = {train[i].id, "holdout-semantic", holdout[h].id};
        return;
      }
    }
  });
  StageResult out;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (verdict[i].reason.empty()) out.kept.push_back(train[i]);
    else out.rejected.push_back(std::move(verdict[i]));
  }
  return out;
}

ClaimRecord silver_decompose(const ClaimRecord& record, JudgeClient& generator) {
  const std::string prompt =
      render_prompt(TemplateId::kSilverDecompose,
                    SlotMap{{"evidence_doc", record.evidence_text()}, {"claim", record.claim}});
  const auto questions =
      parse_question_list(generator.generate(TemplateId::kSilverDecompose, prompt));
  ClaimRecord out = record;
  out.silver_question_count = static_cast<int>(questions.size());
  return out;
}

StageResult silver_filter(const std::vector<ClaimRecord>& records, JudgeClient& generator,
                          int min_questions, unsigned workers) {
  std::vector<ClaimRecord> updated(records.size());
  std::vector<bool> unparsable(records.size(), false);
  parallel_for(records.size(), workers, [&](std::size_t i) {
    if (records[i].silver_question_count) {
      updated[i] = records[i];
      return;
    }
    try {
      updated[i] = silver_decompose(records[i], generator);
    } catch (const ParseError&) {
      unparsable[i] = true;
    }
  });
  StageResult out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (unparsable[i]) {
      out.rejected.push_back({records[i].id, "silver-unparsable", {}});
    } else if (*updated[i].silver_question_count < min_questions) {
      out.rejected.push_back({records[i].id, "silver-too-few-questions",
                              std::to_string(*updated[i].silver_question_count)});
    } else {
      out.kept.push_back(std::move(updated[i]));
    }
  }
  return out;
}

}  // namespace claimforge

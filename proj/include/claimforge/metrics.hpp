#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "claimforge/backends.hpp"
#include "claimforge/corpus.hpp"
#include "claimforge/funnel.hpp"
#include "json.hpp"

namespace claimforge {

// Supported is the positive class.
struct ConfusionCounts {
  std::size_t tp = 0, fn = 0, tn = 0, fp = 0;

  static ConfusionCounts tally(const std::vector<Label>& preds, const std::vector<Label>& golds);
  bool operator==(const ConfusionCounts&) const = default;
};

// (TPR + TNR) / 2. Throws InputError when a gold class is absent.
double balanced_accuracy(const ConfusionCounts& c);
double balanced_accuracy(const std::vector<Label>& preds, const std::vector<Label>& golds);

struct EvalResult {
  ConfusionCounts counts;
  double balanced_accuracy = 0;
};

// Joins predictions JSONL {"id", "pred"} against labeled claims by id.
EvalResult evaluate_predictions(const std::filesystem::path& preds,
                                const std::filesystem::path& gold, const LabelMap& labels);

// Linear interpolation between order statistics. Empty input is an error.
double quantile(std::vector<double> values, double q);

// Mean cosine distance to the k nearest other points (all others when the
// pool has k or fewer).
std::vector<double> isolation_scores(const std::vector<Embedding>& pool, std::size_t k = 10,
                                     unsigned workers = 1);

struct SelectionDiagnostics {
  double d_med = 0;
  double d_95 = 0;
  double outlier_share = 0;
  std::size_t sample_size = 0;
};

// Distances from a seeded pool subsample (capped at `sample_size`) to the
// nearest selected point, and the share of the selection inside the pool's
// top 5% isolation band. Pools with fewer than two points have no band and
// report an outlier share of 0.
SelectionDiagnostics selection_diagnostics(const std::vector<Embedding>& pool,
                                           const std::vector<std::size_t>& selected,
                                           std::size_t sample_size = 3000,
                                           std::uint64_t seed = 0, unsigned workers = 1);

// Throws InputError naming the first stage whose counts do not chain.
void validate_report(const FunnelReport& report);

// Fixed-width table, one row per stage. Validates first.
std::string render_report_table(const FunnelReport& report);

}  // namespace claimforge

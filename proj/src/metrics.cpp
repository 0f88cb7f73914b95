#include "claimforge/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "claimforge/error.hpp"
#include "claimforge/io.hpp"
#include "claimforge/parallel.hpp"

namespace claimforge {

using nlohmann::json;

ConfusionCounts ConfusionCounts::tally(const std::vector<Label>& preds,
                                       const std::vector<Label>& golds) {
  if (preds.size() != golds.size()) {
    throw InputError("predictions and gold labels differ in length");
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const bool pos_gold = golds[i] == Label::kSupported;
    const bool pos_pred = preds[i] == Label::kSupported;
    if (pos_gold) (pos_pred ? c.tp : c.fn) += 1;
    else (pos_pred ? c.fp : c.tn) += 1;
  }
  return c;
}

double balanced_accuracy(const ConfusionCounts& c) {
  if (c.tp + c.fn == 0) throw InputError("no Supported claims among the gold labels");
  if (c.tn + c.fp == 0) throw InputError("no Refuted claims among the gold labels");
  const double tpr = static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  const double tnr = static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
  return (tpr + tnr) / 2.0;
}

double balanced_accuracy(const std::vector<Label>& preds, const std::vector<Label>& golds) {
  return balanced_accuracy(ConfusionCounts::tally(preds, golds));
}

EvalResult evaluate_predictions(const std::filesystem::path& preds_path,
                                const std::filesystem::path& gold_path, const LabelMap& labels) {
  std::unordered_map<std::string, Label> gold;
  for (const auto& r : ingest_claims(gold_path, labels)) {
    if (r.label) gold.emplace(r.id, *r.label);
  }
  std::vector<Label> preds, golds;
  std::unordered_set<std::string> seen;
  const auto lines = read_lines(preds_path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_blank(lines[i])) continue;
    json j;
    try {
      j = json::parse(lines[i]);
    } catch (const json::parse_error&) {
      throw InputError("malformed prediction line", i + 1);
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string() || !j.contains("pred") ||
        !j["pred"].is_string()) {
      throw InputError("prediction needs string \"id\" and \"pred\"", i + 1);
    }
    const std::string id = j["id"].get<std::string>();
    const auto pred = parse_label(j["pred"].get<std::string>());
    if (!pred) throw InputError("unknown prediction \"" + j["pred"].get<std::string>() + "\"", i + 1);
    auto it = gold.find(id);
    if (it == gold.end()) throw InputError("no labeled gold claim with id \"" + id + "\"", i + 1);
    if (!seen.insert(id).second) throw InputError("duplicate prediction for \"" + id + "\"", i + 1);
    preds.push_back(*pred);
    golds.push_back(it->second);
  }
  EvalResult r;
  r.counts = ConfusionCounts::tally(preds, golds);
  r.balanced_accuracy = balanced_accuracy(r.counts);
  return r;
}

double quantile(std::vector<double> v, double q) {
  if (v.empty()) throw InputError("quantile of an empty sample");
  std::sort(v.begin(), v.end());
  const double h = q * static_cast<double>(v.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, v.size() - 1);
  return v[lo] + (h - static_cast<double>(lo)) * (v[hi] - v[lo]);
}

std::vector<double> isolation_scores(const std::vector<Embedding>& pool, std::size_t k,
                                     unsigned workers) {
  const std::size_t n = pool.size();
  std::vector<double> out(n, 0.0);
  if (n < 2) return out;
  const std::size_t kk = std::min(k, n - 1);
  parallel_for(n, workers, [&](std::size_t i) {
    std::vector<double> d;
    d.reserve(n - 1);
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) d.push_back(1.0 - cosine(pool[i], pool[j]));
    }
    std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(kk), d.end());
    double s = 0.0;
    for (std::size_t t = 0; t < kk; ++t) s += d[t];
    out[i] = s / static_cast<double>(kk);
  });
  return out;
}

SelectionDiagnostics selection_diagnostics(const std::vector<Embedding>& pool,
                                           const std::vector<std::size_t>& selected,
                                           std::size_t sample_size, std::uint64_t seed,
                                           unsigned workers) {
  if (selected.empty()) throw InputError("selection diagnostics need a non-empty selection");
  const std::size_t n = pool.size();
  std::unordered_set<std::size_t> chosen;
  for (std::size_t s : selected) {
    if (s >= n) throw InputError("selected index " + std::to_string(s) + " is outside the pool");
    chosen.insert(s);
  }

  std::vector<std::size_t> sample;
  if (n <= sample_size) {
    sample.resize(n);
    for (std::size_t i = 0; i < n; ++i) sample[i] = i;
  } else {
    sample = random_select(n, sample_size, seed);
  }
  std::vector<double> dist(sample.size());
  parallel_for(sample.size(), workers, [&](std::size_t t) {
    const std::size_t i = sample[t];
    if (chosen.count(i)) {
      dist[t] = 0.0;
      return;
    }
    double best = -1.0;
    for (std::size_t s : chosen) best = std::max(best, cosine(pool[i], pool[s]));
    dist[t] = std::max(0.0, 1.0 - best);
  });

  SelectionDiagnostics d;
  d.sample_size = sample.size();
  d.d_med = quantile(dist, 0.5);
  d.d_95 = quantile(dist, 0.95);
  if (n >= 2) {
    const auto iso = isolation_scores(pool, 10, workers);
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return iso[a] > iso[b]; });
    const auto band_size = static_cast<std::size_t>(std::ceil(0.05 * static_cast<double>(n)));
    std::unordered_set<std::size_t> band(order.begin(),
                                         order.begin() + static_cast<std::ptrdiff_t>(band_size));
    std::size_t inside = 0;
    for (std::size_t s : chosen) inside += band.count(s);
    d.outlier_share = static_cast<double>(inside) / static_cast<double>(chosen.size());
  }
  return d;
}

void validate_report(const FunnelReport& report) {
  for (std::size_t k = 0; k < report.stages.size(); ++k) {
    const StageStats& s = report.stages[k];
    if (k > 0 && s.input != report.stages[k - 1].output) {
      throw InputError("report chain broken at stage \"" + s.name + "\": input " +
                       std::to_string(s.input) + " but \"" + report.stages[k - 1].name +
                       "\" produced " + std::to_string(report.stages[k - 1].output));
    }
    if (s.additive) {
      if (s.output < s.input) {
        throw InputError("stage \"" + s.name + "\" only adds records but its count shrank");
      }
      continue;
    }
    if (s.output > s.input) {
      throw InputError("stage \"" + s.name + "\" produced more records than it received");
    }
    std::size_t removed = 0;
    for (const auto& [reason, n] : s.reasons) removed += n;
    if (removed != s.input - s.output) {
      throw InputError("stage \"" + s.name + "\" rejection reasons sum to " +
                       std::to_string(removed) + ", expected " +
                       std::to_string(s.input - s.output));
    }
  }
}

std::string render_report_table(const FunnelReport& report) {
  validate_report(report);
  std::ostringstream out;
  out << std::left << std::setw(16) << "stage" << std::right << std::setw(9) << "input"
      << std::setw(9) << "output" << std::setw(9) << "change" << "  reasons\n";
  for (const auto& s : report.stages) {
    const long long change = static_cast<long long>(s.output) - static_cast<long long>(s.input);
    out << std::left << std::setw(16) << s.name << std::right << std::setw(9) << s.input
        << std::setw(9) << s.output << std::setw(9) << (change > 0 ? "+" : "") + std::to_string(change);
    std::string reasons;
    for (const auto& [reason, n] : s.reasons) {
      if (!reasons.empty()) reasons += ", ";
      reasons += reason + "=" + std::to_string(n);
    }
    out << (reasons.empty() ? "" : "  " + reasons) << '\n';
  }
  return out.str();
}

}  // namespace claimforge

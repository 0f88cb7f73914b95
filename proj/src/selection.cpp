#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <queue>
#include <random>
#include <set>

#include "claimforge/error.hpp"
#include "claimforge/funnel.hpp"
#include "claimforge/hash.hpp"
#include "claimforge/parallel.hpp"
#include "claimforge/simd/kernels.hpp"

namespace claimforge {

// ---- budgets -------------------------------------------------------------------

std::vector<std::size_t> sqrt_allocation(const std::vector<std::size_t>& sizes,
                                         const std::vector<std::string>& names,
                                         std::size_t budget) {
  const std::size_t m = sizes.size();
  if (names.size() != m) throw InputError("sqrt_allocation: sizes and names differ in length");
  const std::size_t capacity = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
  if (budget > capacity) {
    throw InputError("budget " + std::to_string(budget) + " exceeds the " +
                     std::to_string(capacity) + " available records");
  }
  std::vector<std::size_t> out(m, 0);
  if (budget == 0) return out;

  // Water-filling: shares proportional to sqrt(size); any share above its
  // size is pinned there and the rest is re-spread.
  std::vector<double> quota(m, 0.0);
  std::vector<bool> capped(m, false);
  double remaining = static_cast<double>(budget);
  for (;;) {
    double weight = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      if (!capped[i]) weight += std::sqrt(static_cast<double>(sizes[i]));
    }
    bool changed = false;
    for (std::size_t i = 0; i < m; ++i) {
      if (capped[i]) continue;
      quota[i] = weight > 0 ? remaining * std::sqrt(static_cast<double>(sizes[i])) / weight : 0.0;
      if (quota[i] > static_cast<double>(sizes[i])) {
        capped[i] = true;
        quota[i] = static_cast<double>(sizes[i]);
        remaining -= quota[i];
        changed = true;
      }
    }
    if (!changed) break;
  }

  // Largest remainder; ties go to the earlier name.
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < m; ++i) {
    out[i] = std::min(sizes[i], static_cast<std::size_t>(std::floor(quota[i] + 1e-9)));
    assigned += out[i];
  }
  std::vector<std::size_t> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    const double ra = quota[a] - static_cast<double>(out[a]);
    const double rb = quota[b] - static_cast<double>(out[b]);
    if (ra != rb) return ra > rb;
    return names[a] < names[b];
  });
  while (assigned < budget) {
    bool progressed = false;
    for (std::size_t i : order) {
      if (assigned == budget) break;
      if (out[i] < sizes[i]) {
        ++out[i];
        ++assigned;
        progressed = true;
      }
    }
    if (!progressed) break;
  }
  return out;
}

SelectionBudget allocate_budgets(const std::vector<ClaimRecord>& pool, std::size_t total) {
  if (total < 2) throw InputError("selection budget must be at least 2");
  if (total > pool.size()) {
    throw InputError("selection budget " + std::to_string(total) + " exceeds pool size " +
                     std::to_string(pool.size()));
  }
  std::map<Cell, std::size_t> population;
  for (const auto& r : pool) {
    if (!r.label) throw InputError("record \"" + r.id + "\" has no label; selection needs one");
    ++population[{*r.label, r.source}];
  }
  SelectionBudget out;
  out.total = total;
  for (Label label : {Label::kSupported, Label::kRefuted}) {
    const std::size_t half = label == Label::kSupported ? (total + 1) / 2 : total / 2;
    std::vector<std::size_t> sizes;
    std::vector<std::string> names;
    std::vector<Cell> cells;
    for (const auto& [cell, n] : population) {
      if (cell.label != label) continue;
      cells.push_back(cell);
      sizes.push_back(n);
      names.push_back(cell.source);
    }
    const std::size_t available = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
    if (half > available) {
      throw InputError(std::string(to_string(label)) + " half of the budget (" +
                       std::to_string(half) + ") exceeds the " + std::to_string(available) +
                       " " + std::string(to_string(label)) + " records in the pool");
    }
    const auto shares = sqrt_allocation(sizes, names, half);
    for (std::size_t i = 0; i < cells.size(); ++i) out.cells[cells[i]] = shares[i];
  }
  return out;
}

// ---- facility location ---------------------------------------------------------

SimilarityMatrix similarity_matrix(const std::vector<Embedding>& v, unsigned workers) {
  SimilarityMatrix m;
  m.n = v.size();
  m.values.assign(m.n * m.n, 0.0);
  parallel_for(m.n, workers, [&](std::size_t i) {
    for (std::size_t j = 0; j < m.n; ++j) m.values[i * m.n + j] = cosine(v[i], v[j]);
  });
  return m;
}

double facility_location_value(const SimilarityMatrix& sim, const std::vector<std::size_t>& s) {
  double total = 0.0;
  for (std::size_t i = 0; i < sim.n; ++i) {
    double best = 0.0;
    for (std::size_t j : s) best = std::max(best, sim(i, j));
    total += best;
  }
  return total;
}

namespace {

// Column j of a symmetric matrix equals row j, so the gain of adding j is
// sum_i max(0, sim(j, i) - best[i]).
double gain_of(const SimilarityMatrix& sim, const std::vector<double>& best, std::size_t j) {
  return simd::kernels().coverage_gain(sim.row(j), best.data(), sim.n);
}

void check_ranks(const SimilarityMatrix& sim, const std::vector<std::size_t>& tie_rank,
                 std::size_t k) {
  if (tie_rank.size() != sim.n) throw InputError("tie ranks must cover every point");
  if (k > sim.n) {
    throw InputError("cannot select " + std::to_string(k) + " of " + std::to_string(sim.n) +
                     " points");
  }
}

}  // namespace

std::vector<std::size_t> facility_location_greedy(const SimilarityMatrix& sim,
                                                  const std::vector<std::size_t>& tie_rank,
                                                  std::size_t k, bool lazy,
                                                  std::vector<double>* gains) {
  check_ranks(sim, tie_rank, k);
  const std::size_t n = sim.n;
  std::vector<double> best(n, 0.0);
  std::vector<std::size_t> picked;
  picked.reserve(k);
  if (gains) gains->clear();

  const auto take = [&](std::size_t j, double g) {
    picked.push_back(j);
    if (gains) gains->push_back(g);
    simd::kernels().max_update(best.data(), sim.row(j), n);
  };

  if (!lazy) {
    std::vector<bool> chosen(n, false);
    while (picked.size() < k) {
      std::size_t arg = n;
      double top = -std::numeric_limits<double>::infinity();
      for (std::size_t j = 0; j < n; ++j) {
        if (chosen[j]) continue;
        const double g = gain_of(sim, best, j);
        if (g > top || (g == top && tie_rank[j] < tie_rank[arg])) {
          top = g;
          arg = j;
        }
      }
      chosen[arg] = true;
      take(arg, top);
    }
    return picked;
  }

  // Upper bounds only shrink as the selection grows, so an entry whose bound
  // was refreshed this round and still tops the heap is the exact argmax.
  struct Entry {
    double gain;
    std::size_t rank;
    std::size_t index;
    std::size_t round;
  };
  const auto lower_priority = [](const Entry& a, const Entry& b) {
    if (a.gain != b.gain) return a.gain < b.gain;
    return a.rank > b.rank;
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(lower_priority)> heap(lower_priority);
  for (std::size_t j = 0; j < n; ++j) heap.push({gain_of(sim, best, j), tie_rank[j], j, 0});
  while (picked.size() < k) {
    Entry top = heap.top();
    heap.pop();
    if (top.round == picked.size()) {
      take(top.index, top.gain);
    } else {
      top.gain = gain_of(sim, best, top.index);
      top.round = picked.size();
      heap.push(top);
    }
  }
  return picked;
}

std::vector<std::size_t> farthest_point_select(const SimilarityMatrix& sim,
                                               const std::vector<std::size_t>& tie_rank,
                                               std::size_t k) {
  check_ranks(sim, tie_rank, k);
  const std::size_t n = sim.n;
  std::vector<std::size_t> picked;
  if (k == 0) return picked;

  std::size_t seed = n;
  double best_total = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    double total = 0.0;
    for (std::size_t j = 0; j < n; ++j) total += sim(i, j);
    if (total > best_total || (total == best_total && tie_rank[i] < tie_rank[seed])) {
      best_total = total;
      seed = i;
    }
  }
  std::vector<bool> chosen(n, false);
  std::vector<double> min_dist(n, std::numeric_limits<double>::infinity());
  auto add = [&](std::size_t s) {
    chosen[s] = true;
    picked.push_back(s);
    for (std::size_t i = 0; i < n; ++i) min_dist[i] = std::min(min_dist[i], 1.0 - sim(i, s));
  };
  add(seed);
  while (picked.size() < k) {
    std::size_t arg = n;
    double far = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (chosen[i]) continue;
      if (min_dist[i] > far || (min_dist[i] == far && tie_rank[i] < tie_rank[arg])) {
        far = min_dist[i];
        arg = i;
      }
    }
    add(arg);
  }
  return picked;
}

std::vector<std::size_t> random_select(std::size_t n, std::size_t k, std::uint64_t seed) {
  if (k > n) {
    throw InputError("cannot select " + std::to_string(k) + " of " + std::to_string(n) +
                     " points");
  }
  std::mt19937_64 rng(seed);
  // Unbiased bounded draw; the standard distributions differ across
  // library implementations.
  const auto below = [&](std::uint64_t bound) {
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                std::numeric_limits<std::uint64_t>::max() % bound;
    std::uint64_t x;
    do {
      x = rng();
    } while (x >= limit);
    return x % bound;
  };
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + static_cast<std::size_t>(below(n - i));
    std::swap(idx[i], idx[j]);
  }
  idx.resize(k);
  return idx;
}

std::vector<std::size_t> id_ranks(const std::vector<std::string>& ids) {
  std::vector<std::size_t> order(ids.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return ids[a] != ids[b] ? ids[a] < ids[b] : a < b;
  });
  std::vector<std::size_t> rank(ids.size());
  for (std::size_t r = 0; r < order.size(); ++r) rank[order[r]] = r;
  return rank;
}

std::string_view to_string(Selector s) {
  switch (s) {
    case Selector::kFacilityLocation: return "facility_location";
    case Selector::kFarthestPoint: return "farthest_point";
    case Selector::kRandom: return "random";
  }
  return "?";
}

Selector selector_from_name(std::string_view name) {
  if (name == "facility_location") return Selector::kFacilityLocation;
  if (name == "farthest_point") return Selector::kFarthestPoint;
  if (name == "random") return Selector::kRandom;
  throw ConfigError("unknown selector \"" + std::string(name) + "\"");
}

std::vector<ClaimRecord> select_records(const std::vector<ClaimRecord>& pool,
                                        const SelectionBudget& budget, Selector selector,
                                        Embedder* embedder, std::uint64_t seed,
                                        unsigned workers) {
  std::map<Cell, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (!pool[i].label) throw InputError("record \"" + pool[i].id + "\" has no label");
    members[{*pool[i].label, pool[i].source}].push_back(i);
  }

  std::vector<Embedding> emb;
  if (selector != Selector::kRandom) {
    if (!embedder) throw ConfigError("embedding selectors need an embedding backend");
    std::vector<std::string> claims;
    for (const auto& r : pool) claims.push_back(r.claim);
    embedder->set_workers(workers);
    emb = embedder->embed(claims);
  }

  std::vector<std::size_t> chosen;
  for (const auto& [cell, k] : budget.cells) {
    if (k == 0) continue;
    auto it = members.find(cell);
    const std::size_t size = it == members.end() ? 0 : it->second.size();
    if (k > size) {
      throw InputError("cell (" + std::string(to_string(cell.label)) + ", " + cell.source +
                       ") budget " + std::to_string(k) + " exceeds its " +
                       std::to_string(size) + " records");
    }
    const auto& idx = it->second;
    std::vector<std::size_t> local;
    if (selector == Selector::kRandom) {
      local = random_select(idx.size(), k,
                            derive_seed(seed, "select/" + std::string(to_string(cell.label)) +
                                                  "/" + cell.source));
    } else {
      std::vector<Embedding> cell_emb;
      std::vector<std::string> ids;
      for (std::size_t i : idx) {
        cell_emb.push_back(emb[i]);
        ids.push_back(pool[i].id);
      }
      const auto sim = similarity_matrix(cell_emb, workers);
      const auto ranks = id_ranks(ids);
      local = selector == Selector::kFacilityLocation ? facility_location_greedy(sim, ranks, k)
                                                      : farthest_point_select(sim, ranks, k);
    }
    for (std::size_t l : local) chosen.push_back(idx[l]);
  }
  std::sort(chosen.begin(), chosen.end());
  std::vector<ClaimRecord> out;
  out.reserve(chosen.size());
  for (std::size_t i : chosen) out.push_back(pool[i]);
  return out;
}

std::vector<ClaimRecord> long_evidence_augment(const std::vector<ClaimRecord>& pool,
                                               const std::vector<ClaimRecord>& selected,
                                               std::size_t min_tokens) {
  std::vector<ClaimRecord> out = selected;
  std::set<std::string> present;
  for (const auto& r : selected) present.insert(r.id);
  for (const auto& r : pool) {
    if (present.count(r.id)) continue;
    if (count_tokens(r.evidence_text()).count >= min_tokens) {
      present.insert(r.id);
      out.push_back(r);
    }
  }
  return out;
}

}  // namespace claimforge

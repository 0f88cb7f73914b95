#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "claimforge/error.hpp"
#include "claimforge/funnel.hpp"
#include "doctest.h"
#include "synth.hpp"
#include "test_util.hpp"

using namespace claimforge;
using namespace claimforge::testing;
using nlohmann::json;

namespace {

std::vector<ClaimRecord> load(const std::string& rel) {
  return ingest_claims(data_dir() / rel, LabelMap::defaults());
}

Embedder fixture_embedder(const std::string& rel) {
  auto t = std::make_shared<FixtureTransport>(data_dir() / rel);
  return Embedder(std::make_shared<Gateway>("embedder", t));
}

std::vector<std::string> ids_of(const std::vector<ClaimRecord>& rs) {
  std::vector<std::string> out;
  for (const auto& r : rs) out.push_back(r.id);
  return out;
}

double dot(const Embedding& a, const Embedding& b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

ClaimRecord rec(std::string id, Label label, std::string source, std::string claim = "c",
                std::vector<std::string> evidence = {"e"}) {
  ClaimRecord r;
  r.id = std::move(id);
  r.claim = std::move(claim);
  r.evidence = std::move(evidence);
  r.label = label;
  r.source = std::move(source);
  return r;
}

SimilarityMatrix random_similarity(Rng& rng, std::size_t n, std::size_t dim) {
  std::vector<Embedding> v;
  for (std::size_t i = 0; i < n; ++i) v.push_back(random_unit(rng, dim));
  return similarity_matrix(v);
}

double naive_f(const SimilarityMatrix& sim, const std::vector<std::size_t>& s) {
  double f = 0;
  for (std::size_t i = 0; i < sim.n; ++i) {
    double m = 0;
    for (std::size_t j : s) m = std::max(m, sim(i, j));
    f += m;
  }
  return f;
}

}  // namespace

TEST_CASE("shingles") {
  CHECK(shingles("a b c d").hashes.size() == 2);
  CHECK(shingles("one two").hashes.size() == 1);
  CHECK(shingles("solo").hashes.size() == 1);
  CHECK(shingles("").hashes.empty());
  CHECK(shingles("  ...  ").hashes.empty());
  CHECK(shingles("The Quick brown fox.") == shingles("the quick, brown FOX"));
  CHECK(shingles("a b c a b c").hashes.size() == 3);
  const auto s = shingles("w1 w2 w3 w4 w5 w6 w7");
  CHECK(std::is_sorted(s.hashes.begin(), s.hashes.end()));
}

TEST_CASE("exact Jaccard") {
  CHECK(exact_jaccard(shingles(""), shingles("")) == 0.0);
  CHECK(exact_jaccard(shingles("a b c d"), shingles("a b c d")) == 1.0);
  // {abc, bcd} vs {abc, bce}: 1 shared of 3.
  CHECK(exact_jaccard(shingles("a b c d"), shingles("a b c e")) == doctest::Approx(1.0 / 3));
  CHECK(exact_jaccard(shingles("a b c"), shingles("x y z")) == 0.0);
}

TEST_CASE("MinHash estimates track exact Jaccard") {
  Rng rng(41);
  double sq = 0;
  int n = 0;
  for (int i = 0; i < 400; ++i) {
    const std::string base = passage(rng, 30);
    std::string other = base;
    const int edits = static_cast<int>(rng.below(12));
    for (int e = 0; e < edits; ++e) other += " extra" + std::to_string(rng.below(1000));
    if (rng.chance(0.3)) other = passage(rng, 30);
    const auto a = shingles(base), b = shingles(other);
    const double j = exact_jaccard(a, b);
    const auto sa = minhash_signature(a), sb = minhash_signature(b);
    CHECK(sa.size() == kMinHashPermutations);
    const double est = estimate_jaccard(sa, sb);
    // Six standard deviations of a 128-sample binomial.
    CHECK(std::abs(est - j) <= 6 * std::sqrt(j * (1 - j) / 128) + 1e-9);
    sq += (est - j) * (est - j);
    ++n;
  }
  CHECK(sq / n < 0.25 / 128);
  const auto s = shingles("x y z w");
  CHECK(minhash_signature(s) == minhash_signature(s));
  CHECK(minhash_signature(s, 1) != minhash_signature(s, 2));
}

TEST_CASE("MinHash dedup matches a brute-force greedy pass") {
  const auto records = load("dedup/claims.jsonl");
  REQUIRE(records.size() == 500);
  std::vector<ShingleSet> sh;
  for (const auto& r : records) sh.push_back(shingles(r.claim));

  std::vector<std::string> expect_kept;
  std::vector<std::size_t> kept_idx;
  for (std::size_t i = 0; i < records.size(); ++i) {
    bool dup = false;
    for (std::size_t k : kept_idx) dup = dup || exact_jaccard(sh[i], sh[k]) >= 0.7;
    if (!dup) {
      kept_idx.push_back(i);
      expect_kept.push_back(records[i].id);
    }
  }

  for (unsigned workers : {1u, 8u}) {
    DedupOptions opt;
    opt.workers = workers;
    const auto out = dedup_minhash(records, opt);
    CHECK(ids_of(out.kept) == expect_kept);
    CHECK(out.kept.size() + out.rejected.size() == records.size());
    std::map<std::string, std::size_t> pos;
    for (std::size_t i = 0; i < records.size(); ++i) pos[records[i].id] = i;
    for (const auto& rj : out.rejected) {
      CHECK(rj.reason == "minhash-duplicate");
      CHECK(exact_jaccard(sh[pos[rj.id]], sh[pos[rj.detail]]) >= 0.7);
      CHECK(pos[rj.detail] < pos[rj.id]);
    }
    // Idempotent on its own output.
    CHECK(dedup_minhash(out.kept, opt).rejected.empty());
  }

  // Banding alone can only miss pairs, never invent them.
  DedupOptions banded;
  banded.exact_recall = false;
  const auto loose = dedup_minhash(records, banded);
  CHECK(loose.rejected.size() <= records.size() - expect_kept.size());
  for (const auto& rj : loose.rejected) CHECK(rj.reason == "minhash-duplicate");
}

TEST_CASE("semantic dedup matches a brute-force greedy pass") {
  const auto records = load("dedup/claims.jsonl");
  auto embedder = fixture_embedder("dedup/fixtures.jsonl");
  std::vector<std::string> texts;
  for (const auto& r : records) texts.push_back(r.claim);
  const auto emb = embedder.embed(texts);

  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < records.size(); ++i) {
    bool dup = false;
    for (std::size_t k : kept) dup = dup || dot(emb[i], emb[k]) >= 0.70;
    if (!dup) kept.push_back(i);
  }
  std::vector<std::string> expect;
  for (std::size_t k : kept) expect.push_back(records[k].id);

  for (unsigned workers : {1u, 8u}) {
    const auto out = dedup_semantic(records, embedder, 0.70, workers);
    CHECK(ids_of(out.kept) == expect);
    for (const auto& rj : out.rejected) CHECK(rj.reason == "semantic-duplicate");
    CHECK(dedup_semantic(out.kept, embedder, 0.70, workers).rejected.empty());
  }
}

TEST_CASE("decontamination removes exactly the matching records") {
  const auto records = load("dedup/claims.jsonl");
  const auto holdout = load("dedup/holdout.jsonl");
  auto embedder = fixture_embedder("dedup/fixtures.jsonl");
  std::vector<std::string> all;
  for (const auto& r : records) all.push_back(r.claim);
  for (const auto& r : holdout) all.push_back(r.claim);
  const auto emb = embedder.embed(all);

  std::set<std::string> lexical, semantic;
  for (std::size_t i = 0; i < records.size(); ++i) {
    bool lex = false, sem = false;
    for (std::size_t h = 0; h < holdout.size(); ++h) {
      lex = lex || exact_jaccard(shingles(records[i].claim), shingles(holdout[h].claim)) >= 0.7;
      sem = sem || dot(emb[i], emb[records.size() + h]) >= 0.90;
    }
    if (lex) lexical.insert(records[i].id);
    else if (sem) semantic.insert(records[i].id);
  }
  CHECK(lexical.size() >= 20);
  CHECK(!semantic.empty());

  for (unsigned workers : {1u, 8u}) {
    DecontaminationOptions opt;
    opt.workers = workers;
    const auto out = decontaminate(records, holdout, embedder, opt);
    std::set<std::string> got_lex, got_sem;
    for (const auto& rj : out.rejected) {
      (rj.reason == "holdout-minhash" ? got_lex : got_sem).insert(rj.id);
      CHECK((rj.reason == "holdout-minhash" || rj.reason == "holdout-semantic"));
    }
    CHECK(got_lex == lexical);
    CHECK(got_sem == semantic);
    CHECK(decontaminate(out.kept, holdout, embedder, opt).rejected.empty());
  }
  CHECK_THROWS_AS(decontaminate(records, {}, embedder), InputError);
}

TEST_CASE("rule filter reasons and order") {
  RuleThresholds t;
  t.min_evidence_tokens = 5;
  t.max_evidence_tokens = 20;
  const HeuristicEntityCounter ner;
  const std::string p = "one two three four";
  std::vector<ClaimRecord> rs = {
      rec("ok", Label::kSupported, "s", "Anna Berg met Carl Dorn in Oslo.", {p, p, p}),
      rec("few", Label::kSupported, "s", "Anna Berg met Carl Dorn.", {p, p}),
      rec("short", Label::kSupported, "s", "Anna Berg met Carl Dorn.", {"a", "b", "c"}),
      rec("long", Label::kSupported, "s", "Anna Berg met Carl Dorn.", {p + " " + p + " " + p, p + " " + p + " " + p, p + " " + p + " " + p}),
      rec("copy", Label::kSupported, "s", "Anna Berg met Carl Dorn.", {"Anna Berg met Carl Dorn.", p, p}),
      rec("noent", Label::kSupported, "s", "This is true.", {p, p, p}),
  };
  const auto out = rule_filter(rs, t, ner);
  CHECK(ids_of(out.kept) == std::vector<std::string>{"ok"});
  std::map<std::string, std::string> why;
  for (const auto& r : out.rejected) why[r.id] = r.reason;
  CHECK(why["few"] == "too-few-passages");
  CHECK(why["short"] == "too-short");
  CHECK(why["long"] == "too-long");
  CHECK(why["copy"] == "high-overlap");
  CHECK(why["noent"] == "too-few-entities");
}

TEST_CASE("difficulty band is inclusive") {
  auto gw = std::make_shared<Gateway>(
      "verifier", std::make_shared<FunctionTransport>([](const json& r) {
        return std::string(r.at("claim").get<std::string>());
      }));
  Verifier v(gw);
  std::vector<ClaimRecord> rs;
  for (const char* p : {"0.29", "0.3", "0.5", "0.8", "0.81"}) {
    rs.push_back(rec(std::string("s") + p, Label::kSupported, "x", p));
    rs.push_back(rec(std::string("r") + p, Label::kRefuted, "x", p));
  }
  const auto out = difficulty_filter(rs, v);
  std::set<std::string> kept;
  for (const auto& r : out.kept) kept.insert(r.id);
  // Refuted uses 1 - p: 0.7, 0.5 and 0.2 / 0.19 for p 0.8 / 0.81.
  CHECK(kept == std::set<std::string>{"s0.3", "s0.5", "s0.8", "r0.29", "r0.3", "r0.5"});
  for (const auto& r : out.rejected) CHECK(r.reason == "outside-difficulty-band");
  rs.push_back(rec("unlabeled", Label::kSupported, "x", "0.5"));
  rs.back().label.reset();
  CHECK_THROWS_AS(difficulty_filter(rs, v), InputError);
}

TEST_CASE("silver decomposition") {
  auto gw = std::make_shared<Gateway>(
      "judge", std::make_shared<FunctionTransport>([](const json& r) {
        const std::string prompt = r.at("prompt");
        if (prompt.find("[three]") != std::string::npos) return std::string("1. Who?\n2. What?\n3. When?");
        if (prompt.find("[one]") != std::string::npos) return std::string("1. Who?");
        return std::string("no questions here");
      }));
  JudgeClient gen(gw);
  std::vector<ClaimRecord> rs = {rec("a", Label::kSupported, "s", "[three]"),
                                 rec("b", Label::kSupported, "s", "[one]"),
                                 rec("c", Label::kSupported, "s", "[zero]"),
                                 rec("d", Label::kSupported, "s", "[zero]")};
  rs[3].silver_question_count = 4;
  CHECK(silver_decompose(rs[0], gen).silver_question_count == 3);
  CHECK_THROWS_AS(silver_decompose(rs[2], gen), ParseError);
  const auto out = silver_filter(rs, gen);
  CHECK(ids_of(out.kept) == std::vector<std::string>{"a", "d"});
  CHECK(out.kept[1].silver_question_count == 4);
  std::map<std::string, std::string> why;
  for (const auto& r : out.rejected) why[r.id] = r.reason;
  CHECK(why["b"] == "silver-too-few-questions");
  CHECK(why["c"] == "silver-unparsable");
}

TEST_CASE("facility location: value, lazy and naive greedy agree") {
  Rng rng(42);
  for (int trial = 0; trial < 60; ++trial) {
    const std::size_t n = 2 + rng.below(40);
    const auto sim = random_similarity(rng, n, 1 + rng.below(6));
    std::vector<std::size_t> rank(n);
    std::iota(rank.begin(), rank.end(), 0);
    for (std::size_t i = n; i > 1; --i) std::swap(rank[i - 1], rank[rng.below(i)]);
    const std::size_t k = 1 + rng.below(n);
    std::vector<double> g1, g2;
    const auto lazy = facility_location_greedy(sim, rank, k, true, &g1);
    const auto naive = facility_location_greedy(sim, rank, k, false, &g2);
    CHECK(lazy == naive);
    CHECK(g1 == g2);
    CHECK(std::set<std::size_t>(lazy.begin(), lazy.end()).size() == k);
    for (std::size_t i = 1; i < g1.size(); ++i) CHECK(g1[i] <= g1[i - 1] + 1e-12);
    CHECK(facility_location_value(sim, lazy) == doctest::Approx(naive_f(sim, lazy)).epsilon(1e-12));
    CHECK(std::accumulate(g1.begin(), g1.end(), 0.0) ==
          doctest::Approx(facility_location_value(sim, lazy)).epsilon(1e-9));
  }
  const auto sim = random_similarity(rng, 5, 3);
  CHECK(facility_location_value(sim, {}) == 0.0);
}

TEST_CASE("facility location greedy is within 1 - 1/e of the optimum") {
  Rng rng(43);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t n = 6 + rng.below(7);
    const std::size_t k = 1 + rng.below(4);
    const auto sim = random_similarity(rng, n, 2 + rng.below(3));
    std::vector<std::size_t> rank(n);
    std::iota(rank.begin(), rank.end(), 0);
    const double greedy = facility_location_value(sim, facility_location_greedy(sim, rank, k));
    double best = 0;
    std::vector<bool> mask(n, false);
    std::fill(mask.begin(), mask.begin() + static_cast<long>(k), true);
    std::sort(mask.begin(), mask.end());
    do {
      std::vector<std::size_t> s;
      for (std::size_t i = 0; i < n; ++i) if (mask[i]) s.push_back(i);
      best = std::max(best, naive_f(sim, s));
    } while (std::next_permutation(mask.begin(), mask.end()));
    CHECK(greedy >= (1 - 1 / std::exp(1.0)) * best - 1e-12);
    CHECK(greedy <= best + 1e-12);
  }
}

TEST_CASE("ties go to the lower rank") {
  SimilarityMatrix sim{3, {1, 0, 0, 0, 1, 0, 0, 0, 1}};
  CHECK(facility_location_greedy(sim, {2, 0, 1}, 1) == std::vector<std::size_t>{1});
  CHECK(facility_location_greedy(sim, {2, 0, 1}, 3) == std::vector<std::size_t>{1, 2, 0});
  CHECK(farthest_point_select(sim, {2, 0, 1}, 2) == std::vector<std::size_t>{1, 2});
  CHECK(id_ranks({"b", "c", "a"}) == std::vector<std::size_t>{1, 2, 0});
}

TEST_CASE("farthest point selection") {
  Rng rng(44);
  for (int trial = 0; trial < 30; ++trial) {
    const std::size_t n = 3 + rng.below(20);
    const auto sim = random_similarity(rng, n, 3);
    std::vector<std::size_t> rank(n);
    std::iota(rank.begin(), rank.end(), 0);
    const std::size_t k = 1 + rng.below(n);
    const auto pick = farthest_point_select(sim, rank, k);
    REQUIRE(pick.size() == k);
    std::size_t seed = 0;
    double best = -1e9;
    for (std::size_t i = 0; i < n; ++i) {
      double t = 0;
      for (std::size_t j = 0; j < n; ++j) t += sim(i, j);
      if (t > best) best = t, seed = i;
    }
    CHECK(pick[0] == seed);
    for (std::size_t s = 1; s < k; ++s) {
      const auto dist = [&](std::size_t i) {
        double d = 1e9;
        for (std::size_t t = 0; t < s; ++t) d = std::min(d, 1 - sim(i, pick[t]));
        return d;
      };
      for (std::size_t i = 0; i < n; ++i) {
        if (std::find(pick.begin(), pick.begin() + static_cast<long>(s), i) != pick.begin() + static_cast<long>(s)) continue;
        CHECK(dist(pick[s]) >= dist(i));
      }
    }
  }
}

TEST_CASE("random selection") {
  const auto a = random_select(100, 30, 9);
  CHECK(a == random_select(100, 30, 9));
  CHECK(a != random_select(100, 30, 10));
  CHECK(std::set<std::size_t>(a.begin(), a.end()).size() == 30);
  for (std::size_t i : a) CHECK(i < 100);
  CHECK(random_select(5, 5, 1).size() == 5);
  CHECK_THROWS_AS(random_select(3, 4, 1), InputError);
  // Every index is reachable with roughly equal frequency.
  std::vector<int> hits(10, 0);
  for (std::uint64_t s = 0; s < 2000; ++s) ++hits[random_select(10, 1, s)[0]];
  for (int h : hits) CHECK(std::abs(h - 200) < 60);
}

TEST_CASE("square-root allocation") {
  CHECK(sqrt_allocation({100, 400}, {"a", "b"}, 30) == std::vector<std::size_t>{10, 20});
  CHECK(sqrt_allocation({1, 100}, {"a", "b"}, 10) == std::vector<std::size_t>{1, 9});
  CHECK(sqrt_allocation({4, 4}, {"a", "b"}, 3) == std::vector<std::size_t>{2, 1});
  CHECK(sqrt_allocation({4, 4}, {"b", "a"}, 3) == std::vector<std::size_t>{1, 2});
  Rng rng(45);
  for (int i = 0; i < 200; ++i) {
    const std::size_t m = 1 + rng.below(6);
    std::vector<std::size_t> sizes;
    std::vector<std::string> names;
    for (std::size_t k = 0; k < m; ++k) {
      sizes.push_back(1 + rng.below(500));
      names.push_back("src" + std::to_string(k));
    }
    const std::size_t cap = std::accumulate(sizes.begin(), sizes.end(), std::size_t{0});
    const std::size_t budget = rng.below(cap + 1);
    const auto alloc = sqrt_allocation(sizes, names, budget);
    CHECK(std::accumulate(alloc.begin(), alloc.end(), std::size_t{0}) == budget);
    for (std::size_t k = 0; k < m; ++k) CHECK(alloc[k] <= sizes[k]);
  }
}

TEST_CASE("budget allocation over labels and sources") {
  std::vector<ClaimRecord> pool;
  for (int i = 0; i < 100; ++i) pool.push_back(rec("a" + std::to_string(i), Label::kSupported, "small"));
  for (int i = 0; i < 400; ++i) pool.push_back(rec("b" + std::to_string(i), Label::kSupported, "big"));
  for (int i = 0; i < 50; ++i) pool.push_back(rec("c" + std::to_string(i), Label::kRefuted, "small"));
  const auto b = allocate_budgets(pool, 61);
  CHECK(b.total == 61);
  CHECK(b.cells.at({Label::kSupported, "small"}) == 10);
  CHECK(b.cells.at({Label::kSupported, "big"}) == 21);
  CHECK(b.cells.at({Label::kRefuted, "small"}) == 30);
  CHECK_THROWS_AS(allocate_budgets(pool, 120), InputError);
  CHECK_THROWS_AS(allocate_budgets(pool, 1000), InputError);
}

TEST_CASE("record selection honours cell budgets and pool order") {
  Rng rng(46);
  std::vector<ClaimRecord> pool;
  for (int i = 0; i < 60; ++i) {
    pool.push_back(rec("p" + std::to_string(100 + i), i % 3 ? Label::kSupported : Label::kRefuted,
                       i % 2 ? "x" : "y", claim_sentence(rng)));
  }
  const auto budget = allocate_budgets(pool, 20);
  auto gw = std::make_shared<Gateway>(
      "embedder", std::make_shared<FunctionTransport>([](const json& r) {
        return json(text_vector(r.at("text"), 8)).dump();
      }));
  Embedder embedder(gw);
  for (Selector s : {Selector::kFacilityLocation, Selector::kFarthestPoint, Selector::kRandom}) {
    const auto sel = select_records(pool, budget, s, &embedder, 3);
    CHECK(sel.size() == 20);
    std::map<Cell, std::size_t> counts;
    for (const auto& r : sel) ++counts[{*r.label, r.source}];
    CHECK(counts == budget.cells);
    std::vector<std::string> ids = ids_of(sel);
    CHECK(std::is_sorted(ids.begin(), ids.end()));
    CHECK(ids_of(select_records(pool, budget, s, &embedder, 3, 8)) == ids);
    CHECK(selector_from_name(to_string(s)) == s);
  }
  CHECK_THROWS_AS(selector_from_name("best"), ConfigError);
}

TEST_CASE("long-evidence augmentation") {
  std::vector<ClaimRecord> pool = {rec("a", Label::kSupported, "s", "c", {"x y z"}),
                                   rec("b", Label::kSupported, "s", "c", {"x y", "z w"}),
                                   rec("c", Label::kSupported, "s", "c", {"x"}),
                                   rec("d", Label::kRefuted, "s", "c", {"x y z w v"})};
  const auto out = long_evidence_augment(pool, {pool[3]}, 3);
  CHECK(ids_of(out) == std::vector<std::string>{"d", "a", "b"});
  CHECK(long_evidence_augment(pool, pool, 1).size() == 4);
}

TEST_CASE("funnel config") {
  const json base = {{"inputs", {"a.jsonl"}}, {"budget", 10}};
  const auto c = parse_funnel_config(base, "/data");
  CHECK(c.inputs == std::vector<std::filesystem::path>{"/data/a.jsonl"});
  CHECK(c.selector == Selector::kFacilityLocation);
  CHECK(c.thresholds.rule.min_passages == 3);
  CHECK(c.thresholds.semantic_cosine == 0.70);
  CHECK(c.thresholds.decontam_cosine == 0.90);

  json t = base;
  t["thresholds"] = {{"difficulty_low", 0.2}, {"min_silver_questions", 3}};
  t["label_map"] = {{"yes", "Supported"}};
  const auto c2 = parse_funnel_config(t, "/data");
  CHECK(c2.thresholds.difficulty.low == 0.2);
  CHECK(c2.thresholds.min_silver_questions == 3);
  CHECK(c2.label_map.lookup("YES") == Label::kSupported);

  for (json bad : {json::array(), json{{"budget", 10}}, json{{"inputs", {"a"}}},
                   json{{"inputs", {"a"}}, {"budget", 1}},
                   json{{"inputs", {"a"}}, {"budget", 10}, {"bogus", 1}},
                   json{{"inputs", {"a"}}, {"budget", 10}, {"thresholds", {{"typo", 1}}}},
                   json{{"inputs", {"a"}}, {"budget", 10}, {"selector", "nope"}},
                   json{{"inputs", {"a"}}, {"budget", 10}, {"label_map", {{"x", "maybe"}}}},
                   json{{"inputs", {"a"}}, {"budget", 10},
                        {"thresholds", {{"difficulty_low", 0.9}, {"difficulty_high", 0.1}}}}}) {
    CHECK_THROWS_AS(parse_funnel_config(bad, "/"), ConfigError);
  }
  TempDir dir("cfg");
  CHECK_THROWS_AS(load_funnel_config(dir / "missing.json"), ConfigError);
  write_text(dir / "bad.json", "{not json");
  CHECK_THROWS_AS(load_funnel_config(dir / "bad.json"), ConfigError);
}

TEST_CASE("report JSON round trip") {
  FunnelReport r;
  r.stages = {{"rule", 10, 7, {{"too-short", 3}}, false}, {"augment", 5, 6, {}, true}};
  CHECK(report_from_json(to_json(r)) == r);
  CHECK(report_from_json(json::parse(to_json(r).dump())) == r);
}

TEST_CASE("funnel run on the bundled corpus") {
  const auto config = load_funnel_config(data_dir() / "funnel" / "config.json");
  FunnelOptions one;
  const auto a = run_funnel(config, one);
  FunnelOptions eight;
  eight.workers = 8;
  const auto b = run_funnel(config, eight);
  CHECK(to_json(a.report).dump() == to_json(b.report).dump());
  CHECK(to_jsonl(a.records) == to_jsonl(b.records));

  const auto& st = a.report.stages;
  REQUIRE(st.size() == 8);
  const std::vector<std::string> names = {"rule", "difficulty", "minhash", "semantic",
                                          "decontaminate", "silver", "select", "augment"};
  for (std::size_t i = 0; i < st.size(); ++i) {
    CHECK(st[i].name == names[i]);
    if (i) CHECK(st[i].input == st[i - 1].output);
    std::size_t rejected = 0;
    for (const auto& [reason, n] : st[i].reasons) rejected += n;
    if (!st[i].additive) CHECK(st[i].input - st[i].output == rejected);
  }
  CHECK(st[0].input == 200);
  CHECK(st[1].reasons.at("outside-difficulty-band") == 22);
  CHECK(st[2].reasons.at("minhash-duplicate") == 10);
  CHECK(st[3].reasons.at("semantic-duplicate") == 10);
  CHECK(st[4].reasons.at("holdout-minhash") == 5);
  CHECK(st[4].reasons.at("holdout-semantic") == 3);
  CHECK(st[5].reasons.at("silver-too-few-questions") == 8);
  CHECK(st[5].reasons.at("silver-unparsable") == 3);
  CHECK(st[6].output == 40);
  CHECK(st[7].additive);
  CHECK(a.records.size() == st[7].output);
  for (const auto& r : a.records) CHECK(r.silver_question_count.value_or(0) >= 2);

  TempDir out("funnel");
  write_funnel_output(a, out.path());
  CHECK(read_text(out / "curated.jsonl") == to_jsonl(a.records));
  CHECK(report_from_json(json::parse(read_text(out / "report.json"))) == a.report);
  CHECK(std::filesystem::exists(out / "rejections.jsonl"));

  FunnelConfig broken = config;
  broken.backends["verifier"] = json{{"fixture", "does-not-exist.jsonl"}};
  CHECK_THROWS(run_funnel(broken, one));
}

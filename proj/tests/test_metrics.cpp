#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <vector>

#include "claimforge/error.hpp"
#include "claimforge/metrics.hpp"
#include "doctest.h"
#include "synth.hpp"
#include "test_util.hpp"

using namespace claimforge;
using namespace claimforge::testing;

namespace {

constexpr Label S = Label::kSupported;
constexpr Label R = Label::kRefuted;

double cos_dist(const Embedding& a, const Embedding& b) {
  double d = 0;
  for (std::size_t i = 0; i < a.size(); ++i) d += a[i] * b[i];
  return 1 - std::clamp(d, -1.0, 1.0);
}

}  // namespace

TEST_CASE("confusion counts and balanced accuracy") {
  const std::vector<Label> gold = {S, S, S, S, R, R};
  const auto c = ConfusionCounts::tally({S, S, S, R, R, S}, gold);
  CHECK(c == ConfusionCounts{3, 1, 1, 1});
  CHECK(balanced_accuracy(c) == doctest::Approx((0.75 + 0.5) / 2));
  CHECK(balanced_accuracy(gold, gold) == 1.0);
  CHECK(balanced_accuracy({R, R, R, R, S, S}, gold) == 0.0);
  CHECK_THROWS_AS(balanced_accuracy({S}, {S, R}), InputError);
  CHECK_THROWS_AS(balanced_accuracy({S, S}, {S, S}), InputError);
}

TEST_CASE("constant predictors score one half regardless of imbalance") {
  Rng rng(51);
  for (int i = 0; i < 100; ++i) {
    std::vector<Label> gold;
    const std::size_t n = 2 + rng.below(200);
    for (std::size_t k = 0; k < n; ++k) gold.push_back(rng.chance(0.15) ? R : S);
    gold[0] = S;
    gold[1] = R;
    CHECK(balanced_accuracy(std::vector<Label>(n, S), gold) == 0.5);
    CHECK(balanced_accuracy(std::vector<Label>(n, R), gold) == 0.5);
    std::vector<Label> flipped;
    for (Label g : gold) flipped.push_back(g == S ? R : S);
    CHECK(balanced_accuracy(flipped, gold) == 0.0);
  }
}

TEST_CASE("prediction files") {
  TempDir dir("eval");
  write_text(dir / "gold.jsonl",
             R"({"id":"a","claim":"x","evidence":["e"],"label":"Supported","source":"s"}
{"id":"b","claim":"x","evidence":["e"],"label":"Refuted","source":"s"}
{"id":"c","claim":"x","evidence":["e"],"label":"Refuted","source":"s"}
)");
  write_text(dir / "p.jsonl", R"({"id":"a","pred":"Supported"}
{"id":"b","pred":"supported"}
{"id":"c","pred":"Refuted"}
)");
  const auto r = evaluate_predictions(dir / "p.jsonl", dir / "gold.jsonl", LabelMap::defaults());
  CHECK(r.counts == ConfusionCounts{1, 0, 1, 1});
  CHECK(r.balanced_accuracy == 0.75);

  const auto expect_line = [&](const std::string& body, std::size_t line) {
    write_text(dir / "bad.jsonl", body);
    try {
      evaluate_predictions(dir / "bad.jsonl", dir / "gold.jsonl", LabelMap::defaults());
      FAIL("expected InputError");
    } catch (const InputError& e) {
      CHECK(e.line() == line);
    }
  };
  expect_line("{\"id\":\"a\",\"pred\":\"Supported\"}\nnot json\n", 2);
  expect_line("{\"id\":\"zz\",\"pred\":\"Supported\"}\n", 1);
  expect_line("{\"id\":\"a\",\"pred\":\"maybe\"}\n", 1);
  expect_line("{\"id\":\"a\",\"pred\":\"Supported\"}\n{\"id\":\"a\",\"pred\":\"Refuted\"}\n", 2);
  expect_line("{\"id\":\"a\"}\n", 1);

  const auto perfect = evaluate_predictions(data_dir() / "score/preds_perfect.jsonl",
                                            data_dir() / "score/claims.jsonl", LabelMap::defaults());
  CHECK(perfect.balanced_accuracy == 1.0);
}

TEST_CASE("quantile") {
  CHECK(quantile({3, 1, 2, 4}, 0.5) == 2.5);
  CHECK(quantile({3, 1, 2, 4}, 0.0) == 1.0);
  CHECK(quantile({3, 1, 2, 4}, 1.0) == 4.0);
  CHECK(quantile({7}, 0.95) == 7.0);
  CHECK(quantile({0, 10}, 0.95) == doctest::Approx(9.5));
  CHECK_THROWS_AS(quantile({}, 0.5), InputError);
  Rng rng(52);
  for (int i = 0; i < 200; ++i) {
    std::vector<double> v(1 + rng.below(50));
    for (double& x : v) x = rng.normal();
    const double q = rng.uniform();
    const double got = quantile(v, q);
    std::sort(v.begin(), v.end());
    CHECK(got >= v.front());
    CHECK(got <= v.back());
    const double h = q * static_cast<double>(v.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(h);
    const std::size_t hi = std::min(lo + 1, v.size() - 1);
    CHECK(got == doctest::Approx(v[lo] + (h - lo) * (v[hi] - v[lo])));
  }
}

TEST_CASE("isolation scores against brute force") {
  Rng rng(53);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t n = 1 + rng.below(40);
    std::vector<Embedding> pool;
    for (std::size_t i = 0; i < n; ++i) pool.push_back(random_unit(rng, 4));
    const std::size_t k = 1 + rng.below(12);
    const auto got = isolation_scores(pool, k, 1 + static_cast<unsigned>(rng.below(4)));
    REQUIRE(got.size() == n);
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> d;
      for (std::size_t j = 0; j < n; ++j) if (j != i) d.push_back(cos_dist(pool[i], pool[j]));
      std::sort(d.begin(), d.end());
      const std::size_t kk = std::min(k, d.size());
      double s = 0;
      for (std::size_t t = 0; t < kk; ++t) s += d[t];
      CHECK(got[i] == doctest::Approx(kk ? s / kk : 0.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("selection diagnostics") {
  Rng rng(54);
  std::vector<Embedding> pool;
  // A tight cluster plus a few scattered outliers.
  const auto centre = random_unit(rng, 6);
  for (int i = 0; i < 95; ++i) pool.push_back(at_cosine(rng, centre, 0.98));
  for (int i = 0; i < 5; ++i) pool.push_back(at_cosine(rng, centre, -0.2 + 0.1 * i));
  std::vector<std::size_t> all(pool.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;

  const auto everything = selection_diagnostics(pool, all);
  CHECK(everything.d_med == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(everything.d_95 == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(everything.sample_size == 100);
  CHECK(everything.outlier_share == doctest::Approx(0.05));

  const auto outliers = selection_diagnostics(pool, {95, 96, 97, 98, 99});
  CHECK(outliers.outlier_share == 1.0);
  const auto central = selection_diagnostics(pool, {0, 1, 2});
  CHECK(central.outlier_share == 0.0);
  CHECK(central.d_95 > central.d_med);

  const auto sub = selection_diagnostics(pool, {0}, 30, 9);
  CHECK(sub.sample_size == 30);
  CHECK(selection_diagnostics(pool, {0}, 30, 9).d_med == sub.d_med);
  CHECK(selection_diagnostics(pool, {0}, 30, 9, 4).d_95 == sub.d_95);

  CHECK_THROWS_AS(selection_diagnostics(pool, {}), InputError);
  CHECK_THROWS_AS(selection_diagnostics(pool, {100}), InputError);
  CHECK(selection_diagnostics({pool[0]}, {0}).outlier_share == 0.0);
}

TEST_CASE("report validation and table") {
  FunnelReport ok;
  ok.stages = {{"rule", 10, 7, {{"too-short", 3}}, false},
               {"select", 7, 4, {{"not-selected", 3}}, false},
               {"augment", 4, 5, {}, true}};
  CHECK_NOTHROW(validate_report(ok));
  const std::string table = render_report_table(ok);
  CHECK(table.find("rule") != std::string::npos);
  CHECK(table.find("too-short") != std::string::npos);
  CHECK(table.find("+1") != std::string::npos);
  CHECK(table.find("-3") != std::string::npos);

  const auto fails_at = [](FunnelReport r, const std::string& stage) {
    try {
      validate_report(r);
      FAIL("expected InputError");
    } catch (const InputError& e) {
      CHECK(std::string(e.what()).find("\"" + stage + "\"") != std::string::npos);
    }
  };
  FunnelReport chain = ok;
  chain.stages[1].input = 8;
  fails_at(chain, "select");
  FunnelReport grows = ok;
  grows.stages[1].output = 9;
  fails_at(grows, "select");
  FunnelReport shrink = ok;
  shrink.stages[2].output = 3;
  shrink.stages[2].input = 4;
  fails_at(shrink, "augment");
  FunnelReport sums = ok;
  sums.stages[0].reasons["too-short"] = 2;
  fails_at(sums, "rule");
  CHECK_THROWS_AS(render_report_table(sums), InputError);
}

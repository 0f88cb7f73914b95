#include "claimforge/cli.hpp"

#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "claimforge/error.hpp"
#include "claimforge/funnel.hpp"
#include "claimforge/hash.hpp"
#include "claimforge/io.hpp"
#include "claimforge/metrics.hpp"
#include "claimforge/parallel.hpp"
#include "claimforge/rewards.hpp"
#include "claimforge/trace.hpp"
#include "json.hpp"

namespace claimforge {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct GlobalFlags {
  std::uint64_t seed = 42;
  unsigned workers = 1;
  std::string cache_dir;
  std::string fixtures;
  std::string config;
  bool dry_run = false;
};

struct TraceLine {
  std::string id;
  std::string trace;
};

std::vector<TraceLine> read_traces(const fs::path& path) {
  std::vector<TraceLine> out;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_blank(lines[i])) continue;
    json j;
    try {
      j = json::parse(lines[i]);
    } catch (const json::parse_error&) {
      throw InputError("malformed trace line in " + path.string(), i + 1);
    }
    if (!j.is_object() || !j.contains("id") || !j["id"].is_string() || !j.contains("trace") ||
        !j["trace"].is_string()) {
      throw InputError("trace line needs string \"id\" and \"trace\"", i + 1);
    }
    out.push_back({j["id"].get<std::string>(), j["trace"].get<std::string>()});
  }
  return out;
}

std::map<std::string, ClaimRecord> claims_by_id(const fs::path& path) {
  std::map<std::string, ClaimRecord> out;
  for (auto& r : ingest_claims(path, LabelMap::defaults())) out.emplace(r.id, std::move(r));
  return out;
}

const ClaimRecord& claim_for(const std::map<std::string, ClaimRecord>& claims,
                             const std::string& id) {
  auto it = claims.find(id);
  if (it == claims.end()) throw InputError("no claim with id \"" + id + "\"");
  return it->second;
}

// Backends for the standalone subcommands: the "backends" section of
// --config and/or --fixtures.
struct CliBackends {
  BackendSet set;
  json section = json::object();
  fs::path base = fs::current_path();
};

CliBackends cli_backends(const GlobalFlags& g) {
  CliBackends b;
  std::map<TemplateId, int> max_tokens;
  std::optional<fs::path> cache;
  if (!g.config.empty()) {
    const FunnelConfig c = load_funnel_config(g.config);
    b.section = c.backends;
    b.base = c.base_dir;
    max_tokens = c.max_tokens;
    cache = c.cache_dir;
  }
  if (!g.cache_dir.empty()) cache = fs::path(g.cache_dir);
  std::optional<fs::path> fixtures;
  if (!g.fixtures.empty()) fixtures = fs::path(g.fixtures);
  b.set = make_backends(b.section, b.base, cache, fixtures, max_tokens, g.workers);
  return b;
}

template <typename T>
T& need(const std::shared_ptr<T>& p, const char* what) {
  if (!p) {
    throw ConfigError(std::string("no \"") + what +
                      "\" backend: pass --fixtures or a --config with a backends section");
  }
  return *p;
}

void emit(const std::string& text, const std::string& path, std::ostream& out) {
  if (path.empty() || path == "-") out << text;
  else write_file_atomic(path, text);
}

SupervisionMode::Kind mode_for(const std::string& mode, const ClaimRecord& r, double s,
                               std::uint64_t seed) {
  if (mode == "labeled") return SupervisionMode::Kind::kLabeled;
  if (mode == "unlabeled") return SupervisionMode::Kind::kUnlabeled;
  return is_labeled_claim(r.id, s, seed) ? SupervisionMode::Kind::kLabeled
                                         : SupervisionMode::Kind::kUnlabeled;
}

std::string error_line(const Error& e) {
  json j{{"error", to_string(e.kind())}, {"message", e.what()}};
  if (const auto* st = dynamic_cast<const StageError*>(&e)) {
    j["stage"] = st->stage();
    j["cause"] = to_string(st->cause());
  }
  return j.dump();
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Claim-verification reward scoring and training-set curation", "claimforge"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalFlags g;
  app.add_option("--seed", g.seed, "Run seed; stage seeds are derived from it");
  app.add_option("--workers", g.workers, "Worker threads")->check(CLI::Range(1u, 1024u));
  app.add_option("--cache-dir", g.cache_dir, "Judge/embedding response cache directory");
  app.add_option("--fixtures", g.fixtures, "Replay all backends from a fixture JSONL file");
  app.add_option("--config", g.config, "Funnel config JSON (also supplies backends)");
  app.add_flag("--dry-run", g.dry_run, "Validate inputs and config without writing anything");

  // funnel run / funnel report
  auto* funnel = app.add_subcommand("funnel", "Curation funnel");
  funnel->require_subcommand(1);
  auto* funnel_run = funnel->add_subcommand("run", "Run every funnel stage");
  std::string output_dir;
  funnel_run->add_option("--output-dir", output_dir, "Overrides the config's output_dir");
  auto* funnel_report = funnel->add_subcommand("report", "Render a funnel report");
  std::string report_path;
  bool report_json = false;
  funnel_report->add_option("--report", report_path, "report.json")->required();
  funnel_report->add_flag("--json", report_json, "Print normalized JSON instead of a table");

  // dedup
  auto* dedup = app.add_subcommand("dedup", "Near-duplicate removal");
  std::string input, output, holdout_path;
  std::string dedup_mode = "both";
  double jaccard = 0.7, semantic_cos = 0.70, decontam_cos = 0.90;
  dedup->add_option("--input", input, "claims JSONL")->required();
  dedup->add_option("--output", output, "kept claims JSONL (default stdout)");
  dedup->add_option("--mode", dedup_mode, "minhash, semantic or both")
      ->check(CLI::IsMember({"minhash", "semantic", "both"}));
  dedup->add_option("--jaccard", jaccard, "Exact shingle Jaccard threshold");
  dedup->add_option("--cosine", semantic_cos, "Embedding cosine threshold");

  // decontaminate
  auto* decon = app.add_subcommand("decontaminate", "Remove claims matching a holdout set");
  decon->add_option("--input", input, "train claims JSONL")->required();
  decon->add_option("--holdout", holdout_path, "holdout claims JSONL")->required();
  decon->add_option("--output", output, "kept claims JSONL (default stdout)");
  decon->add_option("--jaccard", jaccard, "Exact shingle Jaccard threshold");
  decon->add_option("--cosine", decontam_cos, "Embedding cosine threshold");

  // select
  auto* select = app.add_subcommand("select", "Stratified budgeted selection");
  std::size_t budget = 0;
  std::string selector_name = "facility_location";
  select->add_option("--input", input, "pool claims JSONL")->required();
  select->add_option("--budget", budget, "Number of claims to select")->required();
  select->add_option("--selector", selector_name, "facility_location, farthest_point or random")
      ->check(CLI::IsMember({"facility_location", "farthest_point", "random"}));
  select->add_option("--output", output, "selected claims JSONL (default stdout)");

  // score
  auto* score = app.add_subcommand("score", "Score traces into reward breakdowns");
  std::string traces_path, claims_path, mode = "labeled";
  double rate = 1.0;
  score->add_option("--traces", traces_path, "traces JSONL {id, trace}")->required();
  score->add_option("--claims", claims_path, "claims JSONL")->required();
  score->add_option("--mode", mode, "labeled, unlabeled or partition")
      ->check(CLI::IsMember({"labeled", "unlabeled", "partition"}));
  score->add_option("--supervision-rate", rate, "Labeled fraction for --mode partition")
      ->check(CLI::Range(0.0, 1.0));
  score->add_option("--output", output, "rewards JSONL (default stdout)");

  // score-group
  auto* group = app.add_subcommand("score-group", "Score rollout groups with advantages");
  std::vector<std::string> rollouts;
  std::size_t group_size = 0;
  group->add_option("--rollouts", rollouts, "One traces JSONL per rollout")->required();
  group->add_option("--claims", claims_path, "claims JSONL")->required();
  group->add_option("--mode", mode, "labeled, unlabeled or partition")
      ->check(CLI::IsMember({"labeled", "unlabeled", "partition"}));
  group->add_option("--supervision-rate", rate, "Labeled fraction for --mode partition")
      ->check(CLI::Range(0.0, 1.0));
  group->add_option("--group-size", group_size, "Expected rollouts per claim (G)");
  group->add_option("--output", output, "group results JSONL (default stdout)");

  // eval
  auto* eval = app.add_subcommand("eval", "Balanced accuracy of predictions");
  std::string preds_path, gold_path;
  eval->add_option("--preds", preds_path, "predictions JSONL {id, pred}")->required();
  eval->add_option("--gold", gold_path, "claims JSONL with gold labels")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << json{{"error", "usage"}, {"message", e.what()}}.dump() << '\n';
    return 2;
  }

  try {
    if (*funnel_run) {
      if (g.config.empty()) throw ConfigError("funnel run needs --config");
      FunnelConfig config = load_funnel_config(g.config);
      FunnelOptions opt;
      opt.workers = g.workers;
      if (!g.fixtures.empty()) opt.fixtures = fs::path(g.fixtures);
      if (!g.cache_dir.empty()) opt.cache_dir = fs::path(g.cache_dir);
      if (app.get_option("--seed")->count()) opt.seed = g.seed;
      const fs::path dir = output_dir.empty() ? config.output_dir : fs::path(output_dir);
      if (g.dry_run) {
        for (const auto& p : config.inputs) ingest_claims(p, config.label_map);
        for (const auto& p : config.holdouts) ingest_claims(p, config.label_map);
        make_backends(config.backends, config.base_dir, std::nullopt, opt.fixtures,
                      config.max_tokens, g.workers);
        out << "dry run: config and inputs are valid\n";
        return 0;
      }
      const FunnelOutput result = run_funnel(config, opt);
      write_funnel_output(result, dir);
      out << render_report_table(result.report);
      return 0;
    }
    if (*funnel_report) {
      json j;
      try {
        j = json::parse(read_file(report_path));
      } catch (const json::parse_error&) {
        throw InputError("report " + report_path + " is not valid JSON");
      }
      const FunnelReport report = report_from_json(j);
      validate_report(report);
      if (g.dry_run) return 0;
      out << (report_json ? to_json(report).dump(2) + "\n" : render_report_table(report));
      return 0;
    }
    if (*dedup) {
      auto records = ingest_claims(input, LabelMap::defaults());
      const bool needs_embedder = dedup_mode != "minhash";
      CliBackends b = cli_backends(g);
      if (needs_embedder) need(b.set.embedder, "embedder");
      if (g.dry_run) return 0;
      if (dedup_mode != "semantic") {
        DedupOptions o;
        o.jaccard_threshold = jaccard;
        o.seed = derive_seed(g.seed, "minhash");
        o.workers = g.workers;
        records = dedup_minhash(records, o).kept;
      }
      if (needs_embedder) {
        records = dedup_semantic(records, *b.set.embedder, semantic_cos, g.workers).kept;
      }
      emit(to_jsonl(records), output, out);
      return 0;
    }
    if (*decon) {
      const auto train = ingest_claims(input, LabelMap::defaults());
      const auto holdout = ingest_claims(holdout_path, LabelMap::defaults());
      CliBackends b = cli_backends(g);
      Embedder& embedder = need(b.set.embedder, "embedder");
      if (g.dry_run) return 0;
      DecontaminationOptions o{jaccard, decontam_cos, g.workers};
      emit(to_jsonl(decontaminate(train, holdout, embedder, o).kept), output, out);
      return 0;
    }
    if (*select) {
      const auto pool = ingest_claims(input, LabelMap::defaults());
      const Selector selector = selector_from_name(selector_name);
      CliBackends b = cli_backends(g);
      Embedder* embedder = nullptr;
      if (selector != Selector::kRandom) embedder = &need(b.set.embedder, "embedder");
      const SelectionBudget plan = allocate_budgets(pool, budget);
      if (g.dry_run) return 0;
      emit(to_jsonl(select_records(pool, plan, selector, embedder, derive_seed(g.seed, "select"),
                                   g.workers)),
           output, out);
      return 0;
    }
    if (*score) {
      const auto claims = claims_by_id(claims_path);
      const auto traces = read_traces(traces_path);
      for (const auto& t : traces) claim_for(claims, t.id);
      CliBackends b = cli_backends(g);
      RewardBackends rb{&need(b.set.judge, "judge"), &need(b.set.embedder, "embedder"), 1};
      if (g.dry_run) return 0;

      // Unlabeled traces sharing an id form one rollout group for the
      // pseudo-label.
      std::map<std::string, std::vector<std::optional<Label>>> votes;
      for (const auto& t : traces) votes[t.id].push_back(parse_trace(t.trace).partial_verdict);
      std::vector<std::string> lines(traces.size());
      parallel_for(traces.size(), g.workers, [&](std::size_t i) {
        const ClaimRecord& r = claim_for(claims, traces[i].id);
        const auto kind = mode_for(mode, r, rate, g.seed);
        SupervisionMode m;
        if (kind == SupervisionMode::Kind::kLabeled) {
          if (!r.label) throw InputError("claim \"" + r.id + "\" has no gold label");
          m = SupervisionMode::labeled(*r.label);
        } else {
          m = SupervisionMode::unlabeled(pseudo_label(votes.at(r.id)));
        }
        lines[i] = to_json(total_reward(r, traces[i].trace, m, rb), r.id).dump() + "\n";
      });
      std::string text;
      for (const auto& l : lines) text += l;
      emit(text, output, out);
      return 0;
    }
    if (*group) {
      const auto claims = claims_by_id(claims_path);
      // ids in first-file order; each rollout file contributes one trace per id.
      std::vector<std::string> order;
      std::map<std::string, std::vector<std::string>> by_id;
      for (const auto& path : rollouts) {
        for (const auto& t : read_traces(path)) {
          claim_for(claims, t.id);
          auto& v = by_id[t.id];
          if (v.empty()) order.push_back(t.id);
          v.push_back(t.trace);
        }
      }
      for (const auto& id : order) {
        const std::size_t g_size = by_id[id].size();
        if (group_size && g_size != group_size) {
          throw InputError("claim \"" + id + "\" has " + std::to_string(g_size) +
                           " rollouts, expected " + std::to_string(group_size));
        }
        if (g_size < 2) throw InputError("claim \"" + id + "\" has fewer than two rollouts");
      }
      CliBackends b = cli_backends(g);
      RewardBackends rb{&need(b.set.judge, "judge"), &need(b.set.embedder, "embedder"), 1};
      if (g.dry_run) return 0;
      std::vector<std::string> lines(order.size());
      parallel_for(order.size(), g.workers, [&](std::size_t i) {
        const ClaimRecord& r = claim_for(claims, order[i]);
        const auto kind = mode_for(mode, r, rate, g.seed);
        const GroupResult res = score_group(r, by_id.at(order[i]), kind, rb);
        json rewards = json::array();
        for (const auto& br : res.breakdowns) rewards.push_back(to_json(br, r.id));
        json j{{"id", r.id},
               {"mode", kind == SupervisionMode::Kind::kLabeled ? "labeled" : "unlabeled"},
               {"advantages", res.advantages},
               {"rewards", rewards}};
        if (kind == SupervisionMode::Kind::kUnlabeled) {
          j["pseudo_label"] = res.pseudo_label ? json(to_string(*res.pseudo_label)) : json(nullptr);
        }
        lines[i] = j.dump() + "\n";
      });
      std::string text;
      for (const auto& l : lines) text += l;
      emit(text, output, out);
      return 0;
    }
    if (*eval) {
      const EvalResult r = evaluate_predictions(preds_path, gold_path, LabelMap::defaults());
      if (g.dry_run) return 0;
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.4f\n", r.balanced_accuracy);
      out << buf;
      return 0;
    }
  } catch (const Error& e) {
    err << error_line(e) << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << json{{"error", "internal"}, {"message", e.what()}}.dump() << '\n';
    return 1;
  }
  err << json{{"error", "usage"}, {"message", "no subcommand"}}.dump() << '\n';
  return 2;
}

}  // namespace claimforge

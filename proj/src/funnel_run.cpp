#include <cstdlib>
#include <set>

#include "claimforge/error.hpp"
#include "claimforge/funnel.hpp"
#include "claimforge/hash.hpp"
#include "claimforge/io.hpp"

namespace claimforge {

namespace fs = std::filesystem;
using nlohmann::json;

// ---- report ------------------------------------------------------------------

json to_json(const FunnelReport& report) {
  json stages = json::array();
  for (const auto& s : report.stages) {
    json j{{"name", s.name}, {"input", s.input}, {"output", s.output}, {"reasons", s.reasons}};
    if (s.additive) j["additive"] = true;
    stages.push_back(std::move(j));
  }
  return json{{"stages", stages}};
}

FunnelReport report_from_json(const json& j) {
  FunnelReport r;
  try {
    for (const auto& s : j.at("stages")) {
      StageStats st;
      st.name = s.at("name").get<std::string>();
      st.input = s.at("input").get<std::size_t>();
      st.output = s.at("output").get<std::size_t>();
      st.reasons = s.value("reasons", std::map<std::string, std::size_t>{});
      st.additive = s.value("additive", false);
      r.stages.push_back(std::move(st));
    }
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed funnel report: ") + e.what());
  }
  return r;
}

// ---- config ------------------------------------------------------------------

namespace {

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

void reject_unknown(const json& j, const std::set<std::string>& allowed, std::string_view where) {
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) {
      throw ConfigError("unknown key \"" + key + "\" in " + std::string(where));
    }
  }
}

}  // namespace

FunnelConfig parse_funnel_config(const json& j, const fs::path& base_dir) {
  if (!j.is_object()) throw ConfigError("funnel config must be a JSON object");
  reject_unknown(j,
                 {"inputs", "holdouts", "label_map", "thresholds", "budget", "seed", "selector",
                  "exact_recall", "cache_dir", "output_dir", "backends", "max_tokens"},
                 "funnel config");
  FunnelConfig c;
  c.base_dir = base_dir;
  try {
    if (!j.contains("inputs") || !j["inputs"].is_array() || j["inputs"].empty()) {
      throw ConfigError("funnel config needs a non-empty \"inputs\" list");
    }
    for (const auto& p : j["inputs"]) c.inputs.push_back(resolve(base_dir, p.get<std::string>()));
    for (const auto& p : j.value("holdouts", json::array())) {
      c.holdouts.push_back(resolve(base_dir, p.get<std::string>()));
    }
    if (j.contains("label_map")) {
      c.label_map = LabelMap::defaults();
      for (const auto& [native, label] : j["label_map"].items()) {
        const auto l = parse_label(label.get<std::string>());
        if (!l) throw ConfigError("label_map value \"" + label.get<std::string>() + "\" is not Supported/Refuted");
        c.label_map.set(native, *l);
      }
    }
    if (j.contains("thresholds")) {
      const json& t = j["thresholds"];
      reject_unknown(t,
                     {"min_passages", "min_evidence_tokens", "max_evidence_tokens",
                      "max_lexical_overlap", "min_entities", "difficulty_low", "difficulty_high",
                      "minhash_jaccard", "semantic_cosine", "decontam_jaccard", "decontam_cosine",
                      "min_silver_questions", "long_evidence_tokens"},
                     "thresholds");
      auto& th = c.thresholds;
      th.rule.min_passages = t.value("min_passages", th.rule.min_passages);
      th.rule.min_evidence_tokens = t.value("min_evidence_tokens", th.rule.min_evidence_tokens);
      th.rule.max_evidence_tokens = t.value("max_evidence_tokens", th.rule.max_evidence_tokens);
      th.rule.max_lexical_overlap = t.value("max_lexical_overlap", th.rule.max_lexical_overlap);
      th.rule.min_entities = t.value("min_entities", th.rule.min_entities);
      th.difficulty.low = t.value("difficulty_low", th.difficulty.low);
      th.difficulty.high = t.value("difficulty_high", th.difficulty.high);
      th.minhash_jaccard = t.value("minhash_jaccard", th.minhash_jaccard);
      th.semantic_cosine = t.value("semantic_cosine", th.semantic_cosine);
      th.decontam_jaccard = t.value("decontam_jaccard", th.decontam_jaccard);
      th.decontam_cosine = t.value("decontam_cosine", th.decontam_cosine);
      th.min_silver_questions = t.value("min_silver_questions", th.min_silver_questions);
      th.long_evidence_tokens = t.value("long_evidence_tokens", th.long_evidence_tokens);
    }
    if (!j.contains("budget")) throw ConfigError("funnel config needs \"budget\"");
    c.budget = j["budget"].get<std::size_t>();
    c.seed = j.value("seed", c.seed);
    c.selector = selector_from_name(j.value("selector", std::string("facility_location")));
    c.exact_recall = j.value("exact_recall", c.exact_recall);
    if (j.contains("cache_dir") && !j["cache_dir"].is_null()) {
      c.cache_dir = resolve(base_dir, j["cache_dir"].get<std::string>());
    }
    c.output_dir = resolve(base_dir, j.value("output_dir", std::string("out")));
    c.backends = j.value("backends", json::object());
    if (!c.backends.is_object()) throw ConfigError("\"backends\" must be an object");
    for (const auto& [name, tokens] : j.value("max_tokens", json::object()).items()) {
      c.max_tokens[template_from_name(name)] = tokens.get<int>();
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("funnel config: ") + e.what());
  }
  const auto& th = c.thresholds;
  if (!(th.difficulty.low <= th.difficulty.high)) throw ConfigError("difficulty band is empty");
  if (th.rule.min_evidence_tokens > th.rule.max_evidence_tokens) {
    throw ConfigError("evidence token bounds are inverted");
  }
  if (c.budget < 2) throw ConfigError("budget must be at least 2");
  return c;
}

FunnelConfig load_funnel_config(const fs::path& path) {
  std::error_code ec;
  if (!fs::exists(path, ec)) throw ConfigError("config file not found: " + path.string());
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::parse_error& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_funnel_config(j, fs::absolute(path).parent_path());
}

// ---- backends ----------------------------------------------------------------

BackendSet make_backends(const json& section, const fs::path& base_dir,
                         const std::optional<fs::path>& cache_dir,
                         const std::optional<fs::path>& fixtures,
                         const std::map<TemplateId, int>& max_tokens, unsigned workers) {
  if (!section.is_object()) throw ConfigError("\"backends\" must be an object");
  reject_unknown(section, {"judge", "embedder", "verifier", "ner"}, "backends");
  BackendSet set;
  if (cache_dir) set.cache = std::make_shared<ResponseCache>(*cache_dir);

  std::shared_ptr<Transport> shared_fixture;
  if (fixtures) shared_fixture = std::make_shared<FixtureTransport>(*fixtures);

  const auto gateway = [&](const char* name, const char* env) -> std::shared_ptr<Gateway> {
    const bool configured = section.contains(name);
    if (shared_fixture) {
      std::string id = name;
      unsigned in_flight = 8;
      if (configured) {
        id = section[name].value("id", id);
        in_flight = section[name].value("max_in_flight", in_flight);
      }
      return std::make_shared<Gateway>(id, shared_fixture, set.cache, in_flight);
    }
    if (!configured) return nullptr;
    return make_gateway(parse_backend_spec(section[name], base_dir, name, env), set.cache);
  };

  if (auto g = gateway("judge", "CLAIMFORGE_JUDGE_URL")) {
    set.judge = std::make_shared<JudgeClient>(g);
    for (const auto& [id, tokens] : max_tokens) {
      DecodingParams p = set.judge->params(id);
      p.max_tokens = tokens;
      set.judge->set_params(id, p);
    }
  }
  if (auto g = gateway("embedder", "CLAIMFORGE_EMBEDDER_URL")) {
    set.embedder = std::make_shared<Embedder>(g, 64, workers);
  }
  if (auto g = gateway("verifier", "CLAIMFORGE_VERIFIER_URL")) {
    set.verifier = std::make_shared<Verifier>(g);
  }

  // NER falls back to the capitalized-span heuristic unless configured.
  auto heuristic = std::make_shared<const HeuristicEntityCounter>();
  if (section.contains("ner")) {
    auto g = gateway("ner", "CLAIMFORGE_NER_URL");
    auto remote = std::make_shared<const RemoteEntityCounter>(g);
    if (section["ner"].value("union_with_heuristic", false)) {
      set.ner = std::make_shared<const UnionEntityCounter>(
          std::vector<std::shared_ptr<const EntityCounter>>{remote, heuristic});
    } else {
      set.ner = remote;
    }
  } else {
    set.ner = heuristic;
  }
  return set;
}

// ---- run -----------------------------------------------------------------------

namespace {

std::vector<ClaimRecord> ingest_all(const std::vector<fs::path>& paths, const LabelMap& labels) {
  std::vector<ClaimRecord> out;
  std::set<std::string> ids;
  for (const auto& p : paths) {
    for (auto& r : ingest_claims(p, labels)) {
      if (!ids.insert(r.id).second) {
        throw InputError("duplicate id \"" + r.id + "\" across input files (" + p.string() + ")");
      }
      out.push_back(std::move(r));
    }
  }
  return out;
}

template <typename Fn>
auto in_stage(const std::string& stage, Fn&& fn) {
  try {
    return fn();
  } catch (const StageError&) {
    throw;
  } catch (const Error& e) {
    throw StageError(stage, e.kind(), e.what());
  } catch (const std::exception& e) {
    throw StageError(stage, ErrorKind::kProtocol, e.what());
  }
}

template <typename T>
T& require(const std::shared_ptr<T>& p, const char* backend) {
  if (!p) throw ConfigError(std::string("no \"") + backend + "\" backend configured");
  return *p;
}

}  // namespace

FunnelOutput run_funnel(const FunnelConfig& config, const FunnelOptions& options) {
  const std::uint64_t seed = options.seed.value_or(config.seed);
  const unsigned workers = std::max(1u, options.workers);
  const auto cache_dir = options.cache_dir ? options.cache_dir : config.cache_dir;

  const auto records = in_stage("ingest", [&] { return ingest_all(config.inputs, config.label_map); });
  const auto holdout = in_stage("ingest", [&] { return ingest_all(config.holdouts, config.label_map); });
  BackendSet be = in_stage("backends", [&] {
    return make_backends(config.backends, config.base_dir, cache_dir, options.fixtures,
                         config.max_tokens, workers);
  });

  FunnelOutput out;
  std::vector<ClaimRecord> current = records;
  const auto record_stage = [&](const std::string& name, StageResult r) {
    StageStats st{name, current.size(), r.kept.size(), {}, false};
    for (auto& rej : r.rejected) {
      ++st.reasons[rej.reason];
      out.rejections.emplace_back(name, std::move(rej));
    }
    out.report.stages.push_back(std::move(st));
    current = std::move(r.kept);
  };
  const auto& th = config.thresholds;

  record_stage("rule", in_stage("rule", [&] {
                 return rule_filter(current, th.rule, *be.ner, workers);
               }));
  record_stage("difficulty", in_stage("difficulty", [&] {
                 return difficulty_filter(current, require(be.verifier, "verifier"), th.difficulty,
                                          workers);
               }));
  record_stage("minhash", in_stage("minhash", [&] {
                 DedupOptions o;
                 o.jaccard_threshold = th.minhash_jaccard;
                 o.exact_recall = config.exact_recall;
                 o.seed = derive_seed(seed, "minhash");
                 o.workers = workers;
                 return dedup_minhash(current, o);
               }));
  record_stage("semantic", in_stage("semantic", [&] {
                 return dedup_semantic(current, require(be.embedder, "embedder"),
                                       th.semantic_cosine, workers);
               }));
  record_stage("decontaminate", in_stage("decontaminate", [&] {
                 if (holdout.empty()) return StageResult{current, {}};
                 DecontaminationOptions o{th.decontam_jaccard, th.decontam_cosine, workers};
                 return decontaminate(current, holdout, require(be.embedder, "embedder"), o);
               }));
  record_stage("silver", in_stage("silver", [&] {
                 return silver_filter(current, require(be.judge, "judge"),
                                      th.min_silver_questions, workers);
               }));

  const std::vector<ClaimRecord> pool = current;
  const auto selected = in_stage("select", [&] {
    const auto budget = allocate_budgets(pool, config.budget);
    return select_records(pool, budget, config.selector,
                          config.selector == Selector::kRandom ? nullptr
                                                               : &require(be.embedder, "embedder"),
                          derive_seed(seed, "select"), workers);
  });
  StageStats sel{"select", pool.size(), selected.size(), {}, false};
  if (pool.size() > selected.size()) sel.reasons["not-selected"] = pool.size() - selected.size();
  out.report.stages.push_back(sel);

  out.records = in_stage("augment", [&] {
    return long_evidence_augment(pool, selected, th.long_evidence_tokens);
  });
  out.report.stages.push_back(StageStats{"augment", selected.size(), out.records.size(), {}, true});
  return out;
}

void write_funnel_output(const FunnelOutput& out, const fs::path& dir) {
  std::string rejections;
  for (const auto& [stage, r] : out.rejections) {
    json j{{"stage", stage}, {"id", r.id}, {"reason", r.reason}};
    if (!r.detail.empty()) j["detail"] = r.detail;
    rejections += j.dump() + '\n';
  }
  write_file_atomic(dir / "curated.jsonl", to_jsonl(out.records));
  write_file_atomic(dir / "rejections.jsonl", rejections);
  write_file_atomic(dir / "report.json", to_json(out.report).dump(2) + '\n');
}

}  // namespace claimforge

#include "claimforge/backends.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "claimforge/error.hpp"
#include "claimforge/hash.hpp"
#include "claimforge/io.hpp"
#include "claimforge/parallel.hpp"
#include "claimforge/simd/kernels.hpp"

namespace claimforge {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string_view trim(std::string_view s) {
  const auto ws = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!s.empty() && ws(s.front())) s.remove_prefix(1);
  while (!s.empty() && ws(s.back())) s.remove_suffix(1);
  return s;
}

// Content of the last <tag>...</tag> block, matched case-insensitively.
std::optional<std::string_view> last_block(std::string_view text, std::string_view tag) {
  const std::string hay = lower(text);
  const std::string open = "<" + std::string(tag) + ">";
  const std::string close = "</" + std::string(tag) + ">";
  const auto start = hay.rfind(open);
  if (start == std::string::npos) return std::nullopt;
  const auto body = start + open.size();
  const auto end = hay.find(close, body);
  if (end == std::string::npos) return std::nullopt;
  return text.substr(body, end - body);
}

// Drops "-", "*", "•", "1.", "2)", "Q3:" style prefixes and bold markers.
std::string_view strip_list_marker(std::string_view s) {
  s = trim(s);
  if (s.starts_with("\xE2\x80\xA2")) s.remove_prefix(3);
  else if (!s.empty() && (s.front() == '-' || s.front() == '*' || s.front() == '+')) {
    while (!s.empty() && (s.front() == '-' || s.front() == '*' || s.front() == '+')) s.remove_prefix(1);
  } else {
    std::size_t i = 0;
    if (i < s.size() && (s[i] == 'Q' || s[i] == 'q')) ++i;
    const std::size_t digits_at = i;
    while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) ++i;
    if (i > digits_at && i < s.size() && (s[i] == '.' || s[i] == ')' || s[i] == ':')) {
      s.remove_prefix(i + 1);
    }
  }
  s = trim(s);
  while (s.starts_with("**") && s.ends_with("**") && s.size() >= 4) s = trim(s.substr(2, s.size() - 4));
  return s;
}

std::string_view strip_decoration(std::string_view s) {
  s = trim(s);
  const auto junk = [](char c) { return c == '*' || c == '"' || c == '\'' || c == '.' || c == '`'; };
  while (!s.empty() && junk(s.front())) s.remove_prefix(1);
  while (!s.empty() && junk(s.back())) s.remove_suffix(1);
  return trim(s);
}

json parse_reply(const std::string& text, std::string_view what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error&) {
    throw ProtocolError(std::string(what) + " reply is not valid JSON");
  }
}

}  // namespace

// ---- cache keys --------------------------------------------------------------

CacheKey CacheKey::of(const json& canonical_request) {
  // json objects keep keys sorted, so dump() is canonical.
  return CacheKey{to_hex(sha256(canonical_request.dump()))};
}

json judge_request(std::string_view backend, std::optional<TemplateId> tmpl,
                   std::string_view prompt, const DecodingParams& params) {
  return json{{"kind", "judge"},
              {"backend", backend},
              {"template", tmpl ? json(to_string(*tmpl)) : json(nullptr)},
              {"prompt", prompt},
              {"temperature", params.temperature},
              {"seed", params.seed},
              {"max_tokens", params.max_tokens}};
}

json embed_request(std::string_view backend, std::string_view text) {
  return json{{"kind", "embed"}, {"backend", backend}, {"text", text}};
}

json verify_request(std::string_view backend, std::string_view claim, std::string_view evidence) {
  return json{{"kind", "verify"}, {"backend", backend}, {"claim", claim}, {"evidence", evidence}};
}

json ner_request(std::string_view backend, std::string_view text) {
  return json{{"kind", "ner"}, {"backend", backend}, {"text", text}};
}

// ---- response cache ----------------------------------------------------------

ResponseCache::ResponseCache(fs::path dir) : dir_(std::move(dir)) {}

fs::path ResponseCache::path_for(const CacheKey& key) const {
  return dir_ / key.hex.substr(0, 2) / (key.hex + ".json");
}

std::optional<std::string> ResponseCache::get(const CacheKey& key) const {
  const fs::path path = path_for(key);
  std::error_code ec;
  if (!fs::exists(path, ec)) return std::nullopt;
  json entry;
  try {
    entry = json::parse(read_file(path));
  } catch (const json::parse_error&) {
    throw ProtocolError("corrupt cache entry " + path.string());
  }
  if (!entry.is_object() || entry.value("key", "") != key.hex || !entry.contains("response") ||
      !entry["response"].is_string()) {
    throw ProtocolError("corrupt cache entry " + path.string());
  }
  return entry["response"].get<std::string>();
}

std::string ResponseCache::put(const CacheKey& key, const json& request,
                               const std::string& response) {
  static std::atomic<std::uint64_t> counter{0};
  const fs::path path = path_for(key);
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  if (ec) throw ConfigError("cache directory not writable: " + path.parent_path().string());

  std::ostringstream tmp_name;
  tmp_name << key.hex << ".tmp." << std::hash<std::thread::id>{}(std::this_thread::get_id())
           << '.' << counter.fetch_add(1);
  const fs::path tmp = path.parent_path() / tmp_name.str();
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw ConfigError("cannot write cache file " + tmp.string());
    out << json{{"key", key.hex}, {"request", request}, {"response", response}}.dump(2) << '\n';
    if (!out.flush()) throw ConfigError("cannot write cache file " + tmp.string());
  }
  // A hard link publishes the complete file and fails if the key already
  // exists, so the first writer wins.
  fs::create_hard_link(tmp, path, ec);
  if (ec && ec != std::errc::file_exists && !fs::exists(path)) {
    std::error_code ec2;
    fs::rename(tmp, path, ec2);
    if (ec2) throw ConfigError("cannot publish cache file " + path.string());
    return response;
  }
  fs::remove(tmp, ec);
  if (auto stored = get(key)) return *stored;
  throw ConfigError("cache entry vanished: " + path.string());
}

// ---- transports --------------------------------------------------------------

std::vector<std::string> Transport::call_batch(const std::vector<json>& requests) {
  std::vector<std::string> out;
  out.reserve(requests.size());
  for (const auto& r : requests) out.push_back(call(r));
  return out;
}

FixtureTransport::FixtureTransport(const fs::path& path) {
  std::error_code ec;
  if (!fs::exists(path, ec)) throw ConfigError("fixture file not found: " + path.string());
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (is_blank(lines[i])) continue;
    json j;
    try {
      j = json::parse(lines[i]);
    } catch (const json::parse_error&) {
      throw InputError("malformed fixture line in " + path.string(), i + 1);
    }
    if (!j.is_object() || !j.contains("digest") || !j["digest"].is_string() ||
        !j.contains("response")) {
      throw InputError("fixture line needs \"digest\" and \"response\"", i + 1);
    }
    const json& r = j["response"];
    std::string text = r.is_string() ? r.get<std::string>() : r.dump();
    auto [it, inserted] = responses_.emplace(j["digest"].get<std::string>(), text);
    if (!inserted && it->second != text) {
      throw InputError("conflicting responses for digest " + it->first, i + 1);
    }
  }
}

FixtureTransport::FixtureTransport(std::unordered_map<std::string, std::string> responses)
    : responses_(std::move(responses)) {}

std::string FixtureTransport::call(const json& request) {
  const CacheKey key = CacheKey::of(request);
  auto it = responses_.find(key.hex);
  if (it == responses_.end()) {
    throw TransportError("no fixture response for digest " + key.hex + " (" +
                         request.value("kind", "?") + " request to backend \"" +
                         request.value("backend", "?") + "\")");
  }
  return it->second;
}

// ---- gateway -----------------------------------------------------------------

Gateway::Gateway(std::string backend_id, std::shared_ptr<Transport> transport,
                 std::shared_ptr<ResponseCache> cache, unsigned max_in_flight)
    : backend_id_(std::move(backend_id)),
      transport_(std::move(transport)),
      cache_(std::move(cache)),
      max_in_flight_(std::max(1u, max_in_flight)) {
  if (!transport_) throw ConfigError("backend \"" + backend_id_ + "\" has no transport");
}

void Gateway::acquire() {
  std::unique_lock lock(mu_);
  cv_.wait(lock, [&] { return in_flight_ < max_in_flight_; });
  ++in_flight_;
}

void Gateway::release() {
  {
    std::lock_guard lock(mu_);
    --in_flight_;
  }
  cv_.notify_one();
}

std::string Gateway::request(const json& canonical) {
  const CacheKey key = CacheKey::of(canonical);
  std::promise<std::string> promise;
  std::shared_future<std::string> shared;
  bool leader = false;
  {
    std::lock_guard lock(mu_);
    if (auto it = memo_.find(key.hex); it != memo_.end()) return it->second;
    if (auto it = pending_.find(key.hex); it != pending_.end()) {
      shared = it->second;
    } else {
      shared = promise.get_future().share();
      pending_.emplace(key.hex, shared);
      leader = true;
    }
  }
  if (!leader) return shared.get();

  try {
    std::optional<std::string> text = cache_ ? cache_->get(key) : std::nullopt;
    if (!text) {
      acquire();
      transport_calls_.fetch_add(1);
      try {
        text = transport_->call(canonical);
      } catch (...) {
        release();
        throw;
      }
      release();
      if (cache_) text = cache_->put(key, canonical, *text);
    }
    {
      std::lock_guard lock(mu_);
      memo_.emplace(key.hex, *text);
      pending_.erase(key.hex);
    }
    promise.set_value(*text);
    return *text;
  } catch (...) {
    {
      std::lock_guard lock(mu_);
      pending_.erase(key.hex);
    }
    promise.set_exception(std::current_exception());
    throw;
  }
}

std::vector<std::string> Gateway::request_batch(const std::vector<json>& canonical) {
  std::vector<std::string> out(canonical.size());
  std::vector<CacheKey> keys;
  keys.reserve(canonical.size());
  for (const auto& c : canonical) keys.push_back(CacheKey::of(c));

  // Unique misses, in first-appearance order.
  std::vector<std::size_t> miss_first;
  std::unordered_map<std::string, std::size_t> miss_slot;
  std::vector<bool> resolved(canonical.size(), false);
  for (std::size_t i = 0; i < canonical.size(); ++i) {
    {
      std::lock_guard lock(mu_);
      if (auto it = memo_.find(keys[i].hex); it != memo_.end()) {
        out[i] = it->second;
        resolved[i] = true;
        continue;
      }
    }
    if (miss_slot.count(keys[i].hex)) continue;
    if (cache_) {
      if (auto hit = cache_->get(keys[i])) {
        out[i] = *hit;
        resolved[i] = true;
        std::lock_guard lock(mu_);
        memo_.emplace(keys[i].hex, *hit);
        continue;
      }
    }
    miss_slot.emplace(keys[i].hex, miss_first.size());
    miss_first.push_back(i);
  }

  if (!miss_first.empty()) {
    std::vector<json> requests;
    requests.reserve(miss_first.size());
    for (std::size_t i : miss_first) requests.push_back(canonical[i]);
    acquire();
    transport_calls_.fetch_add(requests.size());
    std::vector<std::string> replies;
    try {
      replies = transport_->call_batch(requests);
    } catch (...) {
      release();
      throw;
    }
    release();
    if (replies.size() != requests.size()) {
      throw ProtocolError("backend \"" + backend_id_ + "\" returned " +
                          std::to_string(replies.size()) + " replies for " +
                          std::to_string(requests.size()) + " requests");
    }
    for (std::size_t m = 0; m < miss_first.size(); ++m) {
      const std::size_t i = miss_first[m];
      std::string text = cache_ ? cache_->put(keys[i], canonical[i], replies[m]) : replies[m];
      std::lock_guard lock(mu_);
      replies[m] = memo_.emplace(keys[i].hex, std::move(text)).first->second;
    }
    for (std::size_t i = 0; i < canonical.size(); ++i) {
      if (!resolved[i]) out[i] = replies[miss_slot.at(keys[i].hex)];
    }
  }
  return out;
}

// ---- judges ------------------------------------------------------------------

std::string judge_generate(Gateway& backend, std::string_view prompt,
                           const DecodingParams& params, std::optional<TemplateId> tmpl) {
  if (params.temperature != 0.0) {
    throw ConfigError("judge decoding must use temperature 0");
  }
  if (params.max_tokens <= 0) throw ConfigError("max_tokens must be positive");
  return backend.request(judge_request(backend.backend_id(), tmpl, prompt, params));
}

JudgeClient::JudgeClient(std::shared_ptr<Gateway> gateway, DecodingParams defaults)
    : gateway_(std::move(gateway)), defaults_(defaults) {
  if (!gateway_) throw ConfigError("judge client needs a backend");
  if (defaults_.temperature != 0.0) throw ConfigError("judge decoding must use temperature 0");
  // Trace-length generations get the larger budget.
  DecodingParams long_form = defaults_;
  long_form.max_tokens = std::max(defaults_.max_tokens, 8192);
  per_template_[TemplateId::kTraceGen] = long_form;
}

void JudgeClient::set_params(TemplateId id, const DecodingParams& params) {
  if (params.temperature != 0.0) throw ConfigError("judge decoding must use temperature 0");
  if (params.max_tokens <= 0) throw ConfigError("max_tokens must be positive");
  per_template_[id] = params;
}

DecodingParams JudgeClient::params(TemplateId id) const {
  auto it = per_template_.find(id);
  return it == per_template_.end() ? defaults_ : it->second;
}

std::string JudgeClient::generate(TemplateId id, const std::string& prompt) {
  return judge_generate(*gateway_, prompt, params(id), id);
}

// ---- embeddings --------------------------------------------------------------

Embedding normalized(std::span<const double> v) {
  const double norm = std::sqrt(simd::dot(v, v));
  if (!(norm > 0.0) || !std::isfinite(norm)) {
    throw ProtocolError("embedding backend returned a zero or non-finite vector");
  }
  Embedding out(v.begin(), v.end());
  for (double& x : out) x /= norm;
  return out;
}

double cosine(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) {
    throw ProtocolError("cosine of vectors with dimensions " + std::to_string(u.size()) +
                        " and " + std::to_string(v.size()));
  }
  return std::clamp(simd::dot(u, v), -1.0, 1.0);
}

Embedder::Embedder(std::shared_ptr<Gateway> gateway, std::size_t batch_size, unsigned workers)
    : gateway_(std::move(gateway)), batch_size_(std::max<std::size_t>(1, batch_size)),
      workers_(workers) {
  if (!gateway_) throw ConfigError("embedder needs a backend");
}

std::vector<Embedding> Embedder::embed(const std::vector<std::string>& texts) {
  std::vector<std::string> misses;
  {
    std::lock_guard lock(mu_);
    std::unordered_map<std::string_view, bool> seen;
    for (const auto& t : texts) {
      if (memo_.count(t) || seen.count(t)) continue;
      seen.emplace(t, true);
      misses.push_back(t);
    }
  }

  const std::size_t chunks = (misses.size() + batch_size_ - 1) / batch_size_;
  std::vector<Embedding> fresh(misses.size());
  parallel_for(chunks, workers_, [&](std::size_t c) {
    const std::size_t lo = c * batch_size_;
    const std::size_t hi = std::min(misses.size(), lo + batch_size_);
    std::vector<json> requests;
    for (std::size_t i = lo; i < hi; ++i) {
      requests.push_back(embed_request(gateway_->backend_id(), misses[i]));
    }
    const auto replies = gateway_->request_batch(requests);
    for (std::size_t i = lo; i < hi; ++i) {
      const json v = parse_reply(replies[i - lo], "embedding");
      if (!v.is_array() || v.empty()) throw ProtocolError("embedding reply is not a vector");
      std::vector<double> raw;
      raw.reserve(v.size());
      for (const auto& x : v) {
        if (!x.is_number()) throw ProtocolError("embedding reply holds a non-number");
        raw.push_back(x.get<double>());
      }
      fresh[i] = normalized(raw);
    }
  });

  for (const auto& e : fresh) {
    std::size_t expected = 0;
    if (!dimension_.compare_exchange_strong(expected, e.size()) && expected != e.size()) {
      throw ProtocolError("embedding dimension mismatch: " + std::to_string(expected) +
                          " vs " + std::to_string(e.size()));
    }
  }

  std::vector<Embedding> out;
  out.reserve(texts.size());
  std::lock_guard lock(mu_);
  for (std::size_t i = 0; i < misses.size(); ++i) memo_.emplace(misses[i], std::move(fresh[i]));
  for (const auto& t : texts) out.push_back(memo_.at(t));
  return out;
}

// ---- verifier and NER --------------------------------------------------------

double Verifier::probability_supported(const ClaimRecord& record) {
  const std::string reply = gateway_->request(
      verify_request(gateway_->backend_id(), record.claim, record.evidence_text()));
  json j = parse_reply(reply, "verifier");
  if (j.is_object() && j.contains("p_supported")) j = j["p_supported"];
  if (!j.is_number()) throw ProtocolError("verifier reply is not a probability");
  const double p = j.get<double>();
  if (!(p >= 0.0 && p <= 1.0)) throw ProtocolError("verifier probability outside [0, 1]");
  return p;
}

double difficulty_score(const ClaimRecord& record, Verifier& verifier) {
  if (!record.label) {
    throw InputError("record \"" + record.id + "\" has no gold label; difficulty needs one");
  }
  const double p = verifier.probability_supported(record);
  return *record.label == Label::kSupported ? p : 1.0 - p;
}

std::vector<std::string> RemoteEntityCounter::entities(std::string_view text) const {
  const std::string reply = gateway_->request(ner_request(gateway_->backend_id(), text));
  json j = parse_reply(reply, "NER");
  if (j.is_object() && j.contains("entities")) j = j["entities"];
  if (!j.is_array()) throw ProtocolError("NER reply is not a list");
  std::vector<std::string> out;
  for (const auto& e : j) {
    if (!e.is_string()) throw ProtocolError("NER reply holds a non-string entity");
    out.push_back(e.get<std::string>());
  }
  return out;
}

// ---- parsers -----------------------------------------------------------------

std::string_view to_string(ThreeWayVerdict v) {
  switch (v) {
    case ThreeWayVerdict::kSupported: return "Supported";
    case ThreeWayVerdict::kRefuted: return "Refuted";
    case ThreeWayVerdict::kNotEnoughInfo: return "Not Enough Information";
  }
  return "?";
}

int parse_binary_answer(std::string_view text) {
  const auto block = last_block(text, "answer");
  if (!block) throw ParseError("no <answer> block", "answer");
  const std::string_view v = strip_decoration(*block);
  if (v == "0") return 0;
  if (v == "1") return 1;
  throw ParseError("answer is not 0 or 1: \"" + std::string(trim(*block)) + "\"", "answer");
}

double AtomicityChecklist::fraction() const {
  const int passed = int(is_question) + int(single_focus) + int(no_conjunctions) +
                     int(verifiable) + int(grounded);
  return passed / 5.0;
}

AtomicityChecklist parse_atomicity(std::string_view text) {
  const auto block = last_block(text, "answer");
  if (!block) throw ParseError("no <answer> block", "answer");
  std::map<std::string, bool> values;
  std::string_view rest = *block;
  while (!rest.empty()) {
    const auto nl = rest.find('\n');
    std::string_view line = strip_list_marker(rest.substr(0, nl));
    rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
    const auto colon = line.find(':');
    if (colon == std::string_view::npos) continue;
    std::string key = lower(strip_decoration(line.substr(0, colon)));
    std::replace(key.begin(), key.end(), ' ', '_');
    std::replace(key.begin(), key.end(), '-', '_');
    const std::string value = lower(strip_decoration(line.substr(colon + 1)));
    if (value == "yes") values[key] = true;
    else if (value == "no") values[key] = false;
  }
  AtomicityChecklist out;
  const std::pair<const char*, bool*> fields[] = {
      {"is_question", &out.is_question}, {"single_focus", &out.single_focus},
      {"no_conjunctions", &out.no_conjunctions}, {"verifiable", &out.verifiable},
      {"grounded", &out.grounded}};
  for (const auto& [key, slot] : fields) {
    auto it = values.find(key);
    if (it == values.end()) {
      throw ParseError(std::string("atomicity answer lacks a YES/NO value for \"") + key + "\"",
                       key);
    }
    *slot = it->second;
  }
  return out;
}

ThreeWayVerdict parse_verdict(std::string_view text) {
  const auto block = last_block(text, "verdict");
  if (!block) throw ParseError("no <verdict> block", "verdict");
  std::string v = lower(strip_decoration(*block));
  // Collapse internal whitespace runs.
  std::string squeezed;
  for (char c : v) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!squeezed.empty() && squeezed.back() != ' ') squeezed.push_back(' ');
    } else {
      squeezed.push_back(c);
    }
  }
  if (squeezed == "supported") return ThreeWayVerdict::kSupported;
  if (squeezed == "refuted") return ThreeWayVerdict::kRefuted;
  if (squeezed == "not enough information" || squeezed == "not enough info" ||
      squeezed == "not_enough_info" || squeezed == "not_enough_information" ||
      squeezed == "nei") {
    return ThreeWayVerdict::kNotEnoughInfo;
  }
  throw ParseError("unrecognized verdict \"" + std::string(trim(*block)) + "\"", "verdict");
}

std::vector<std::string> parse_question_list(std::string_view text) {
  std::vector<std::string> out;
  std::string_view rest = text;
  while (!rest.empty()) {
    const auto nl = rest.find('\n');
    const std::string_view line = strip_list_marker(rest.substr(0, nl));
    rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
    if (line.size() > 1 && line.back() == '?') out.emplace_back(line);
  }
  if (out.empty()) throw ParseError("no questions in decomposition output", "questions");
  return out;
}

// ---- configuration -------------------------------------------------------------

BackendSpec parse_backend_spec(const json& j, const fs::path& base_dir, std::string_view name,
                               const char* env_var) {
  if (!j.is_object()) throw ConfigError("backend \"" + std::string(name) + "\" must be an object");
  BackendSpec spec;
  try {
    spec.id = j.value("id", std::string(name));
    if (j.contains("endpoint") && !j["endpoint"].is_null()) {
      spec.endpoint = j["endpoint"].get<std::string>();
    }
    if (j.contains("fixture") && !j["fixture"].is_null()) {
      fs::path p = j["fixture"].get<std::string>();
      spec.fixture = p.is_absolute() ? p : base_dir / p;
    }
    spec.max_in_flight = j.value("max_in_flight", spec.max_in_flight);
    spec.retries = j.value("retries", spec.retries);
    spec.timeout_seconds = j.value("timeout_seconds", spec.timeout_seconds);
  } catch (const json::exception& e) {
    throw ConfigError("backend \"" + std::string(name) + "\": " + e.what());
  }
  if (spec.endpoint && spec.fixture) {
    throw ConfigError("backend \"" + std::string(name) +
                      "\": endpoint and fixture are mutually exclusive");
  }
  if (!spec.endpoint && !spec.fixture) {
    throw ConfigError("backend \"" + std::string(name) + "\" needs an endpoint or a fixture");
  }
  if (spec.endpoint && env_var) {
    if (const char* v = std::getenv(env_var); v && *v) spec.endpoint = v;
  }
  if (spec.max_in_flight == 0) throw ConfigError("max_in_flight must be positive");
  if (spec.retries < 0) throw ConfigError("retries must be non-negative");
  return spec;
}

std::shared_ptr<Gateway> make_gateway(const BackendSpec& spec,
                                      std::shared_ptr<ResponseCache> cache) {
  std::shared_ptr<Transport> transport;
  if (spec.fixture) {
    transport = std::make_shared<FixtureTransport>(*spec.fixture);
  } else if (spec.endpoint) {
    transport = std::make_shared<HttpTransport>(*spec.endpoint, spec.retries, spec.timeout_seconds);
  } else {
    throw ConfigError("backend \"" + spec.id + "\" needs an endpoint or a fixture");
  }
  return std::make_shared<Gateway>(spec.id, std::move(transport), std::move(cache),
                                   spec.max_in_flight);
}

}  // namespace claimforge

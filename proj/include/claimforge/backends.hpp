#pragma once

// Handles for the external evaluators: LLM judges, the embedding model, the
// difficulty verifier and remote NER. Every request is a canonical JSON
// object; its SHA-256 is the cache key and the fixture digest, so a fixture
// file recorded against a backend id replays the exact same calls offline.

#include <atomic>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "claimforge/corpus.hpp"
#include "claimforge/prompts.hpp"
#include "json.hpp"

namespace claimforge {

struct DecodingParams {
  double temperature = 0.0;
  std::int64_t seed = 42;
  int max_tokens = 4096;

  bool operator==(const DecodingParams&) const = default;
};

struct CacheKey {
  std::string hex;  // 64 lowercase hex chars

  static CacheKey of(const nlohmann::json& canonical_request);
  bool operator==(const CacheKey&) const = default;
};

// Canonical request objects. `backend` is the backend identifier.
nlohmann::json judge_request(std::string_view backend, std::optional<TemplateId> tmpl,
                             std::string_view prompt, const DecodingParams& params);
nlohmann::json embed_request(std::string_view backend, std::string_view text);
nlohmann::json verify_request(std::string_view backend, std::string_view claim,
                              std::string_view evidence);
nlohmann::json ner_request(std::string_view backend, std::string_view text);

// On-disk response cache: <dir>/<first two hex chars>/<hex>.json holding
// {"key", "request", "response"}. Entries are written once; a concurrent
// second writer discards its copy and returns the stored one.
class ResponseCache {
 public:
  explicit ResponseCache(std::filesystem::path dir);

  std::optional<std::string> get(const CacheKey& key) const;
  std::string put(const CacheKey& key, const nlohmann::json& request,
                  const std::string& response);
  std::filesystem::path path_for(const CacheKey& key) const;
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual std::string call(const nlohmann::json& request) = 0;
  // Default issues one call per request.
  virtual std::vector<std::string> call_batch(const std::vector<nlohmann::json>& requests);
};

// Replays responses from JSONL {"digest", "response"}. A request without a
// recorded digest is a TransportError: fixture mode never reaches a network.
class FixtureTransport final : public Transport {
 public:
  explicit FixtureTransport(const std::filesystem::path& path);
  explicit FixtureTransport(std::unordered_map<std::string, std::string> responses);

  std::string call(const nlohmann::json& request) override;
  std::size_t size() const { return responses_.size(); }

 private:
  std::unordered_map<std::string, std::string> responses_;
};

// In-process responder, for scripted mocks.
class FunctionTransport final : public Transport {
 public:
  using Fn = std::function<std::string(const nlohmann::json&)>;
  explicit FunctionTransport(Fn fn) : fn_(std::move(fn)) {}
  std::string call(const nlohmann::json& request) override { return fn_(request); }

 private:
  Fn fn_;
};

// JSON over HTTP POST to a single endpoint URL:
//   judge  {prompt, temperature, seed, max_tokens} -> {text}
//   embed  {texts: [...]}                          -> {vectors: [[...], ...]}
//   verify {claim, evidence}                       -> {p_supported}
//   ner    {text}                                  -> {entities: [...]}
// Connection failures and non-2xx replies are retried `retries` times, then
// surface as TransportError; an unparsable 2xx body is a ProtocolError.
class HttpTransport final : public Transport {
 public:
  explicit HttpTransport(std::string url, int retries = 2, int timeout_seconds = 300);
  ~HttpTransport() override;

  std::string call(const nlohmann::json& request) override;
  std::vector<std::string> call_batch(const std::vector<nlohmann::json>& requests) override;

 private:
  nlohmann::json post(const nlohmann::json& body);

  std::string url_;
  std::string origin_;
  std::string path_;
  int retries_;
  int timeout_seconds_;
};

// Cache + transport + in-flight bound. Concurrent misses on the same key
// share one transport call.
class Gateway {
 public:
  Gateway(std::string backend_id, std::shared_ptr<Transport> transport,
          std::shared_ptr<ResponseCache> cache = nullptr, unsigned max_in_flight = 8);

  const std::string& backend_id() const { return backend_id_; }
  std::string request(const nlohmann::json& canonical);
  std::vector<std::string> request_batch(const std::vector<nlohmann::json>& canonical);

  // Requests forwarded to the transport so far; cache hits do not count.
  std::size_t transport_calls() const { return transport_calls_.load(); }

 private:
  void acquire();
  void release();

  std::string backend_id_;
  std::shared_ptr<Transport> transport_;
  std::shared_ptr<ResponseCache> cache_;
  unsigned max_in_flight_;
  unsigned in_flight_ = 0;
  std::mutex mu_;
  std::condition_variable cv_;
  std::unordered_map<std::string, std::shared_future<std::string>> pending_;
  std::unordered_map<std::string, std::string> memo_;
  std::atomic<std::size_t> transport_calls_{0};
};

// Single-prompt generation through a gateway.
std::string judge_generate(Gateway& backend, std::string_view prompt,
                           const DecodingParams& params,
                           std::optional<TemplateId> tmpl = std::nullopt);

// LLM judge with per-template decoding parameters. Judge decoding is
// greedy: a non-zero temperature is rejected.
class JudgeClient {
 public:
  explicit JudgeClient(std::shared_ptr<Gateway> gateway, DecodingParams defaults = {});

  void set_params(TemplateId id, const DecodingParams& params);
  DecodingParams params(TemplateId id) const;

  std::string generate(TemplateId id, const std::string& prompt);
  Gateway& gateway() { return *gateway_; }

 private:
  std::shared_ptr<Gateway> gateway_;
  DecodingParams defaults_;
  std::map<TemplateId, DecodingParams> per_template_;
};

using Embedding = std::vector<double>;

// Embeddings are L2-normalized on receipt and memoized per text.
class Embedder {
 public:
  explicit Embedder(std::shared_ptr<Gateway> gateway, std::size_t batch_size = 64,
                    unsigned workers = 1);

  std::vector<Embedding> embed(const std::vector<std::string>& texts);
  Embedding embed_one(const std::string& text) { return embed({text}).front(); }

  void set_workers(unsigned workers) { workers_ = workers; }
  std::size_t dimension() const { return dimension_.load(); }
  Gateway& gateway() { return *gateway_; }

 private:
  std::shared_ptr<Gateway> gateway_;
  std::size_t batch_size_;
  unsigned workers_;
  std::atomic<std::size_t> dimension_{0};
  std::mutex mu_;
  std::unordered_map<std::string, Embedding> memo_;
};

// Dot product of unit vectors, clamped to [-1, 1].
double cosine(std::span<const double> u, std::span<const double> v);

// Returns v / |v|; a zero vector is a ProtocolError.
Embedding normalized(std::span<const double> v);

// Strong-verifier probability that the claim is Supported by its evidence.
class Verifier {
 public:
  explicit Verifier(std::shared_ptr<Gateway> gateway) : gateway_(std::move(gateway)) {}
  double probability_supported(const ClaimRecord& record);

 private:
  std::shared_ptr<Gateway> gateway_;
};

// Probability the verifier assigns to the gold label. Unlabeled records are
// an InputError.
double difficulty_score(const ClaimRecord& record, Verifier& verifier);

class RemoteEntityCounter final : public EntityCounter {
 public:
  explicit RemoteEntityCounter(std::shared_ptr<Gateway> gateway)
      : gateway_(std::move(gateway)) {}
  std::vector<std::string> entities(std::string_view text) const override;

 private:
  std::shared_ptr<Gateway> gateway_;
};

// ---- judge response parsers ------------------------------------------------

enum class ThreeWayVerdict { kSupported, kRefuted, kNotEnoughInfo };

std::string_view to_string(ThreeWayVerdict v);

// Content of the last <answer> block as 0 or 1.
int parse_binary_answer(std::string_view text);

struct AtomicityChecklist {
  bool is_question = false;
  bool single_focus = false;
  bool no_conjunctions = false;
  bool verifiable = false;
  bool grounded = false;

  // Fraction of the five criteria that pass.
  double fraction() const;
  bool operator==(const AtomicityChecklist&) const = default;
};

// Reads the five key:YES/NO lines of the last <answer> block, in any order.
// A missing key is a ParseError whose subject() is the key.
AtomicityChecklist parse_atomicity(std::string_view text);

// Content of the last <verdict> block, case-insensitive.
ThreeWayVerdict parse_verdict(std::string_view text);

// Question lines of a silver decomposition: list markers stripped, lines
// ending in '?'. Throws ParseError when none are found.
std::vector<std::string> parse_question_list(std::string_view text);

// ---- configuration -----------------------------------------------------------

// One backend from config: either a live endpoint or a fixture file.
struct BackendSpec {
  std::string id;
  std::optional<std::string> endpoint;
  std::optional<std::filesystem::path> fixture;
  unsigned max_in_flight = 8;
  int retries = 2;
  int timeout_seconds = 300;
};

// Parses {"id"?, "endpoint"? | "fixture"?, "max_in_flight"?, "retries"?}.
// Relative fixture paths resolve against base_dir. If `env_var` is set in
// the environment and the backend is in endpoint mode, it replaces the
// endpoint.
BackendSpec parse_backend_spec(const nlohmann::json& j, const std::filesystem::path& base_dir,
                               std::string_view name, const char* env_var = nullptr);

std::shared_ptr<Gateway> make_gateway(const BackendSpec& spec,
                                      std::shared_ptr<ResponseCache> cache);

}  // namespace claimforge

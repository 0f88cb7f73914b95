#include <chrono>
#include <thread>

#include "claimforge/backends.hpp"
#include "claimforge/error.hpp"
#include "httplib.h"

namespace claimforge {

using nlohmann::json;

HttpTransport::HttpTransport(std::string url, int retries, int timeout_seconds)
    : url_(std::move(url)), retries_(retries), timeout_seconds_(timeout_seconds) {
  const std::string scheme = "http://";
  if (url_.rfind(scheme, 0) != 0) {
    throw ConfigError("endpoint must be an http:// URL: " + url_);
  }
  const auto slash = url_.find('/', scheme.size());
  origin_ = slash == std::string::npos ? url_ : url_.substr(0, slash);
  path_ = slash == std::string::npos ? "/" : url_.substr(slash);
  if (origin_.size() == scheme.size()) throw ConfigError("endpoint has no host: " + url_);
}

HttpTransport::~HttpTransport() = default;

json HttpTransport::post(const json& body) {
  httplib::Client client(origin_);
  client.set_connection_timeout(std::min(timeout_seconds_, 10), 0);
  client.set_read_timeout(timeout_seconds_, 0);
  client.set_write_timeout(timeout_seconds_, 0);
  const std::string payload = body.dump();

  std::string last_failure;
  for (int attempt = 0; attempt <= retries_; ++attempt) {
    if (attempt > 0) std::this_thread::sleep_for(std::chrono::milliseconds(50 * attempt));
    auto res = client.Post(path_, payload, "application/json");
    if (!res) {
      last_failure = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_failure = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status < 200 || res->status >= 300) {
      throw TransportError(url_ + " answered HTTP " + std::to_string(res->status));
    }
    try {
      return json::parse(res->body);
    } catch (const json::parse_error&) {
      throw ProtocolError(url_ + " returned a non-JSON body");
    }
  }
  throw TransportError(url_ + " unreachable after " + std::to_string(retries_ + 1) +
                       " attempts: " + last_failure);
}

std::string HttpTransport::call(const json& request) {
  const std::string kind = request.value("kind", "");
  if (kind == "judge") {
    const json reply = post(json{{"prompt", request.at("prompt")},
                                 {"temperature", request.at("temperature")},
                                 {"seed", request.at("seed")},
                                 {"max_tokens", request.at("max_tokens")}});
    if (!reply.is_object() || !reply.contains("text") || !reply["text"].is_string()) {
      throw ProtocolError(url_ + " judge reply lacks a \"text\" string");
    }
    return reply["text"].get<std::string>();
  }
  if (kind == "embed") return call_batch({request}).front();
  if (kind == "verify") {
    const json reply =
        post(json{{"claim", request.at("claim")}, {"evidence", request.at("evidence")}});
    if (!reply.is_object() || !reply.contains("p_supported") || !reply["p_supported"].is_number()) {
      throw ProtocolError(url_ + " verifier reply lacks a numeric \"p_supported\"");
    }
    return reply["p_supported"].dump();
  }
  if (kind == "ner") {
    const json reply = post(json{{"text", request.at("text")}});
    if (!reply.is_object() || !reply.contains("entities") || !reply["entities"].is_array()) {
      throw ProtocolError(url_ + " NER reply lacks an \"entities\" list");
    }
    return reply["entities"].dump();
  }
  throw ConfigError("unknown request kind \"" + kind + "\"");
}

std::vector<std::string> HttpTransport::call_batch(const std::vector<json>& requests) {
  const bool all_embed = std::all_of(requests.begin(), requests.end(), [](const json& r) {
    return r.value("kind", "") == "embed";
  });
  if (!all_embed || requests.empty()) return Transport::call_batch(requests);

  json texts = json::array();
  for (const auto& r : requests) texts.push_back(r.at("text"));
  const json reply = post(json{{"texts", texts}});
  if (!reply.is_object() || !reply.contains("vectors") || !reply["vectors"].is_array() ||
      reply["vectors"].size() != requests.size()) {
    throw ProtocolError(url_ + " embedding reply lacks one vector per text");
  }
  std::vector<std::string> out;
  out.reserve(requests.size());
  for (const auto& v : reply["vectors"]) out.push_back(v.dump());
  return out;
}

}  // namespace claimforge

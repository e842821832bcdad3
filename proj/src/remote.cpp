// Copyright 2026 The specjudge Authors
// SPDX-License-Identifier: Apache-2.0

#include "specjudge/remote.hpp"

#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace specjudge {
namespace {

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path_prefix;
};

ParsedUrl parse_base_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw InvalidInput("remote: base_url needs a scheme: " + url);
  const std::string scheme = url.substr(0, scheme_end);
  if (scheme != "http") throw InvalidInput("remote: only http:// endpoints are supported: " + url);
  const auto path_start = url.find('/', scheme_end + 3);
  ParsedUrl parsed;
  parsed.origin = url.substr(0, path_start);
  if (path_start != std::string::npos) {
    parsed.path_prefix = url.substr(path_start);
    while (!parsed.path_prefix.empty() && parsed.path_prefix.back() == '/') parsed.path_prefix.pop_back();
  }
  return parsed;
}

bool retryable(int status) { return status == 429 || status >= 500; }

}  // namespace

std::string remote_generate(const RemoteEndpoint& endpoint, const std::string& prompt, int max_tokens,
                            double temperature) {
  if (endpoint.timeout.count() <= 0) throw InvalidInput("remote: timeout must be positive");
  if (endpoint.max_retries < 0) throw InvalidInput("remote: max_retries must be >= 0");
  const ParsedUrl url = parse_base_url(endpoint.base_url);

  const nlohmann::json body = {{"model", endpoint.model},
                               {"prompt", prompt},
                               {"max_tokens", max_tokens},
                               {"temperature", temperature}};
  const std::string payload = body.dump();
  httplib::Headers headers;
  if (endpoint.bearer_token) headers.emplace("Authorization", "Bearer " + *endpoint.bearer_token);

  auto delay = endpoint.initial_backoff;
  for (int attempt = 0;; ++attempt) {
    httplib::Client client(url.origin);
    const auto secs = std::chrono::duration_cast<std::chrono::seconds>(endpoint.timeout);
    const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(endpoint.timeout - secs);
    client.set_connection_timeout(secs.count(), usecs.count());
    client.set_read_timeout(secs.count(), usecs.count());
    client.set_write_timeout(secs.count(), usecs.count());

    auto res = client.Post(url.path_prefix + "/v1/completions", headers, payload, "application/json");
    const int status = res ? res->status : 0;
    if (res && status >= 200 && status < 300) {
      nlohmann::json parsed;
      try {
        parsed = nlohmann::json::parse(res->body);
      } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(std::string("remote: response is not JSON: ") + e.what());
      }
      if (!parsed.is_object() || !parsed.contains("choices") || !parsed["choices"].is_array() ||
          parsed["choices"].empty() || !parsed["choices"][0].is_object() ||
          !parsed["choices"][0].contains("text") || !parsed["choices"][0]["text"].is_string())
        throw ProtocolError("remote: response lacks choices[0].text");
      return parsed["choices"][0]["text"].get<std::string>();
    }
    const bool can_retry = !res || retryable(status);
    if (!can_retry || attempt >= endpoint.max_retries) {
      const std::string reason = res ? "HTTP " + std::to_string(status) : "transport error: " + httplib::to_string(res.error());
      throw RemoteError(status, "remote: " + reason + " after " + std::to_string(attempt + 1) + " attempt(s)");
    }
    std::this_thread::sleep_for(delay);
    delay *= 2;
  }
}

TokenSequence remote_continue(const RemoteEndpoint& endpoint, const Vocab& vocab, TokenSequence context,
                              std::size_t max_new, double temperature) {
  if (max_new == 0) return context;
  const std::string text = remote_generate(endpoint, vocab.decode(context.tokens), static_cast<int>(max_new), temperature);
  std::vector<TokenId> ids;
  try {
    ids = vocab.encode(text);
  } catch (const InvalidInput& e) {
    throw ProtocolError(std::string("remote: completion does not retokenize: ") + e.what());
  }
  for (std::size_t i = 0; i < ids.size() && i < max_new; ++i) {
    context.tokens.push_back(ids[i]);
    if (ids[i] == vocab.eos()) break;
  }
  return context;
}

}  // namespace specjudge

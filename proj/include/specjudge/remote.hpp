// Copyright 2026 The specjudge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <optional>
#include <string>

#include "specjudge/core.hpp"

namespace specjudge {

/// An OpenAI-compatible completions server.
struct RemoteEndpoint {
  /// e.g. "http://127.0.0.1:8080" or "http://host/api"; the request goes to
  /// {base_url}/v1/completions.
  std::string base_url;
  std::string model;
  std::chrono::milliseconds timeout{30000};
  int max_retries = 3;
  /// Delay before the first retry; doubled for each further attempt.
  std::chrono::milliseconds initial_backoff{200};
  /// Sent as "Authorization: Bearer <token>" when present.
  std::optional<std::string> bearer_token;
};

/// POSTs {"model","prompt","max_tokens","temperature"} and returns
/// choices[0].text. Connection failures, 429 and 5xx are retried; other
/// non-2xx statuses and the final failed attempt raise RemoteError. A 2xx body
/// without a string at choices[0].text raises ProtocolError.
std::string remote_generate(const RemoteEndpoint& endpoint, const std::string& prompt, int max_tokens,
                            double temperature);

/// Continues a token sequence through a remote endpoint: the sequence is
/// rendered as text, the completion is retokenized with the local vocabulary
/// and truncated after end-of-sequence or `max_new` tokens. Words outside the
/// vocabulary are a ProtocolError.
TokenSequence remote_continue(const RemoteEndpoint& endpoint, const Vocab& vocab, TokenSequence context,
                              std::size_t max_new, double temperature);

}  // namespace specjudge

// Copyright 2026 The specjudge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "specjudge/error.hpp"

namespace specjudge {

using TokenId = std::int32_t;
using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

/// Closed vocabulary with whitespace tokenization.
class Vocab {
 public:
  Vocab(std::vector<std::string> tokens, std::string_view eos_text);

  std::size_t size() const noexcept { return id_to_text_.size(); }
  TokenId eos() const noexcept { return eos_; }
  bool contains(TokenId id) const noexcept {
    return id >= 0 && static_cast<std::size_t>(id) < size();
  }
  const std::string& text(TokenId id) const;
  std::optional<TokenId> find(std::string_view text) const;
  TokenId id(std::string_view text) const;
  const std::vector<std::string>& tokens() const noexcept { return id_to_text_; }

  /// Splits on ASCII whitespace; unknown words are rejected.
  std::vector<TokenId> encode(std::string_view text) const;
  std::string decode(std::span<const TokenId> ids) const;

 private:
  std::vector<std::string> id_to_text_;
  std::unordered_map<std::string, TokenId> text_to_id_;
  TokenId eos_ = 0;
};

using VocabPtr = std::shared_ptr<const Vocab>;

/// Prompt followed by response, split at `prompt_len`.
struct TokenSequence {
  std::vector<TokenId> tokens;
  std::size_t prompt_len = 0;

  std::size_t size() const noexcept { return tokens.size(); }
  bool empty() const noexcept { return tokens.empty(); }
  std::span<const TokenId> prompt() const noexcept { return {tokens.data(), prompt_len}; }
  std::span<const TokenId> response() const noexcept {
    return {tokens.data() + prompt_len, tokens.size() - prompt_len};
  }
  std::size_t response_len() const noexcept { return tokens.size() - prompt_len; }

  /// First `n` tokens, keeping the prompt boundary clamped to the new length.
  TokenSequence prefix(std::size_t n) const;
  TokenSequence appended(TokenId t) const;

  bool operator==(const TokenSequence&) const = default;
};

/// Column i holds the next-token logits and the hidden state at position i.
struct LmOutput {
  Matrix logits;
  Matrix hidden;

  Eigen::Index positions() const noexcept { return logits.cols(); }
};

/// Logits and hidden state of the last position only.
struct StepOutput {
  Vector logits;
  Vector hidden;
};

/// Read-only language model contract shared by every backend. Implementations
/// are immutable after construction and safe for concurrent use.
class LanguageModel {
 public:
  virtual ~LanguageModel() = default;

  virtual const std::string& name() const = 0;
  virtual Eigen::Index hidden_dim() const = 0;
  virtual const Vocab& vocab() const = 0;

  /// Position i conditions on tokens 0..i inclusive.
  virtual LmOutput forward(const TokenSequence& seq) const = 0;

  /// Output of the last position. The default slices `forward`; backends that
  /// can evaluate one position directly should override it.
  virtual StepOutput step(const TokenSequence& seq) const;
};

using ModelHandle = std::shared_ptr<const LanguageModel>;

/// Rejects empty sequences, bad prompt boundaries and out-of-vocab ids.
void validate_sequence(const TokenSequence& seq, const Vocab& vocab);

LmOutput forward_parallel(const LanguageModel& model, const TokenSequence& seq);
StepOutput forward_step(const LanguageModel& model, const TokenSequence& seq);

/// Argmax of the last-position logits, ties toward the lowest id.
TokenId greedy_next(const LanguageModel& model, const TokenSequence& context);

}  // namespace specjudge

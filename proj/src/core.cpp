// Copyright 2026 The specjudge Authors
// SPDX-License-Identifier: Apache-2.0

#include "specjudge/core.hpp"

#include <algorithm>
#include <cctype>

#include "specjudge/math.hpp"

namespace specjudge {

Vocab::Vocab(std::vector<std::string> tokens, std::string_view eos_text)
    : id_to_text_(std::move(tokens)) {
  if (id_to_text_.size() < 2) throw InvalidInput("vocab: need at least two tokens");
  for (std::size_t i = 0; i < id_to_text_.size(); ++i) {
    const auto& t = id_to_text_[i];
    if (t.empty() || std::any_of(t.begin(), t.end(), [](unsigned char c) { return std::isspace(c); }))
      throw InvalidInput("vocab: token '" + t + "' is empty or contains whitespace");
    if (!text_to_id_.emplace(t, static_cast<TokenId>(i)).second)
      throw InvalidInput("vocab: duplicate token '" + t + "'");
  }
  auto it = text_to_id_.find(std::string(eos_text));
  if (it == text_to_id_.end()) throw InvalidInput("vocab: end-of-sequence token missing");
  eos_ = it->second;
}

const std::string& Vocab::text(TokenId id) const {
  if (!contains(id)) throw InvalidInput("vocab: token id " + std::to_string(id) + " out of range");
  return id_to_text_[static_cast<std::size_t>(id)];
}

std::optional<TokenId> Vocab::find(std::string_view text) const {
  auto it = text_to_id_.find(std::string(text));
  if (it == text_to_id_.end()) return std::nullopt;
  return it->second;
}

TokenId Vocab::id(std::string_view text) const {
  auto found = find(text);
  if (!found) throw InvalidInput("vocab: unknown token '" + std::string(text) + "'");
  return *found;
}

std::vector<TokenId> Vocab::encode(std::string_view text) const {
  std::vector<TokenId> ids;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) ids.push_back(id(text.substr(i, j - i)));
    i = j;
  }
  return ids;
}

std::string Vocab::decode(std::span<const TokenId> ids) const {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i) out += ' ';
    out += text(ids[i]);
  }
  return out;
}

TokenSequence TokenSequence::prefix(std::size_t n) const {
  n = std::min(n, tokens.size());
  return {std::vector<TokenId>(tokens.begin(), tokens.begin() + static_cast<std::ptrdiff_t>(n)),
          std::min(prompt_len, n)};
}

TokenSequence TokenSequence::appended(TokenId t) const {
  TokenSequence out = *this;
  out.tokens.push_back(t);
  return out;
}

StepOutput LanguageModel::step(const TokenSequence& seq) const {
  LmOutput out = forward(seq);
  const Eigen::Index last = out.positions() - 1;
  return {out.logits.col(last), out.hidden.col(last)};
}

void validate_sequence(const TokenSequence& seq, const Vocab& vocab) {
  if (seq.empty()) throw InvalidInput("sequence is empty");
  if (seq.prompt_len > seq.size()) throw InvalidInput("prompt_len exceeds sequence length");
  for (TokenId t : seq.tokens) {
    if (!vocab.contains(t)) throw InvalidInput("token id " + std::to_string(t) + " outside vocabulary");
  }
}

LmOutput forward_parallel(const LanguageModel& model, const TokenSequence& seq) {
  validate_sequence(seq, model.vocab());
  return model.forward(seq);
}

StepOutput forward_step(const LanguageModel& model, const TokenSequence& seq) {
  validate_sequence(seq, model.vocab());
  return model.step(seq);
}

TokenId greedy_next(const LanguageModel& model, const TokenSequence& context) {
  return static_cast<TokenId>(argmax(forward_step(model, context).logits));
}

}  // namespace specjudge

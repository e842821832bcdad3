// Copyright 2026 The specjudge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "specjudge/core.hpp"

namespace specjudge {

struct NGramConfig {
  int order = 2;
  /// Add-k constant.
  double smoothing = 1.0;
  /// Fall back to the longest observed context suffix instead of the uniform
  /// distribution when the full context was never seen.
  bool backoff = false;
  /// When set, response positions also condition on the prompt segment whose
  /// index equals the number of delimiters already emitted in the response.
  /// This lets a local model follow multi-step instructions.
  std::optional<TokenId> align_delimiter;
  std::uint64_t embedding_seed = 0;
  std::string name = "ngram";
};

/// Smoothed n-gram model, P(t|ctx) = (count(ctx,t)+k) / (count(ctx)+k|V|).
///
/// The hidden state at position i is
///   [mean embedding of the last n-1 tokens (16), entropy of the next-token
///    distribution, log-probability of its top-1 token]
/// giving hidden_dim() == 18. For n == 1 the current token alone is embedded.
class NGramModel final : public LanguageModel {
 public:
  static constexpr Eigen::Index kEmbeddingDim = 16;
  static constexpr Eigen::Index kHiddenDim = kEmbeddingDim + 2;

  NGramModel(VocabPtr vocab, NGramConfig config, const std::vector<TokenSequence>& corpus);

  const std::string& name() const override { return config_.name; }
  Eigen::Index hidden_dim() const override { return kHiddenDim; }
  const Vocab& vocab() const override { return *vocab_; }
  LmOutput forward(const TokenSequence& seq) const override;
  StepOutput step(const TokenSequence& seq) const override;

  const NGramConfig& config() const noexcept { return config_; }
  /// |V| x 16, rows are token embeddings.
  const Matrix& embeddings() const noexcept { return embeddings_; }
  std::size_t context_count() const noexcept { return table_.size(); }

 private:
  using Key = std::vector<TokenId>;
  struct KeyHash {
    std::size_t operator()(const Key& k) const noexcept;
  };
  struct Counts {
    std::vector<std::pair<TokenId, double>> entries;
    double total = 0.0;
  };
  struct Segments;

  Segments split_prompt(const TokenSequence& seq) const;
  /// Context keys for predicting token pos+1, longest first.
  std::vector<Key> context_keys(const TokenSequence& seq, std::size_t pos, const Segments& segs,
                                std::size_t delims_seen) const;
  Vector logits_at(const std::vector<Key>& keys) const;
  Vector hidden_at(const TokenSequence& seq, std::size_t pos, const Vector& logits) const;

  VocabPtr vocab_;
  NGramConfig config_;
  Matrix embeddings_;
  std::unordered_map<Key, Counts, KeyHash> table_;
};

std::shared_ptr<const NGramModel> train_ngram(VocabPtr vocab,
                                              const std::vector<TokenSequence>& corpus, int order,
                                              double smoothing, NGramConfig extra = {});

/// Controlled draft/target disagreement.
struct PerturbSpec {
  /// Scale of deterministic standard-normal logit noise keyed on the prefix.
  double noise_scale = 0.0;
  /// Constant logit offsets per token id.
  std::map<TokenId, double> bias_tokens;
  std::uint64_t seed = 0;

  bool is_identity() const noexcept { return noise_scale == 0.0 && bias_tokens.empty(); }
};

/// Wraps a model: logits + noise_scale * noise(prefix) + bias. The hidden state
/// is the wrapped one with one appended scalar, the total-variation distance
/// between the perturbed and the wrapped next-token distributions.
class PerturbedModel final : public LanguageModel {
 public:
  PerturbedModel(ModelHandle base, PerturbSpec spec, std::string name = {});

  const std::string& name() const override { return name_; }
  Eigen::Index hidden_dim() const override { return base_->hidden_dim() + 1; }
  const Vocab& vocab() const override { return base_->vocab(); }
  LmOutput forward(const TokenSequence& seq) const override;
  StepOutput step(const TokenSequence& seq) const override;

  const PerturbSpec& spec() const noexcept { return spec_; }

 private:
  void perturb(Eigen::Ref<Vector> logits, std::uint64_t prefix_hash) const;
  double noise_summary(const Vector& base_logits, const Vector& logits) const;

  ModelHandle base_;
  PerturbSpec spec_;
  std::string name_;
};

ModelHandle make_draft(ModelHandle target, PerturbSpec spec);

/// Hand-built model for tests and scripted scenarios: a callback gives the
/// next-token logits for a prefix. Hidden states are (prefix length, last
/// token id, response length).
class ScriptedModel final : public LanguageModel {
 public:
  using LogitsFn = std::function<Vector(std::span<const TokenId> prefix, std::size_t prompt_len)>;

  ScriptedModel(VocabPtr vocab, LogitsFn fn, std::string name = "scripted");

  const std::string& name() const override { return name_; }
  Eigen::Index hidden_dim() const override { return 3; }
  const Vocab& vocab() const override { return *vocab_; }
  LmOutput forward(const TokenSequence& seq) const override;
  StepOutput step(const TokenSequence& seq) const override;

 private:
  StepOutput at(const TokenSequence& seq, std::size_t pos) const;

  VocabPtr vocab_;
  LogitsFn fn_;
  std::string name_;
};

/// Logits that put `strength` nats on `id` over every other token.
Vector one_hot_logits(std::size_t vocab_size, TokenId id, double strength = 10.0);

}  // namespace specjudge

// Copyright 2026 The specjudge Authors
// SPDX-License-Identifier: Apache-2.0

#include "specjudge/toy_models.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "specjudge/math.hpp"
#include "specjudge/sampling.hpp"

namespace specjudge {
namespace {

// Key markers; token ids are never negative.
constexpr TokenId kAlignedMarker = -4;
constexpr TokenId kPastPromptMarker = -5;
constexpr TokenId kSeparator = -1;

}  // namespace

struct NGramModel::Segments {
  std::vector<std::vector<TokenId>> parts;
};

std::size_t NGramModel::KeyHash::operator()(const Key& k) const noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (TokenId t : k) h = context_hash_extend(h, t);
  return static_cast<std::size_t>(h);
}

NGramModel::NGramModel(VocabPtr vocab, NGramConfig config, const std::vector<TokenSequence>& corpus)
    : vocab_(std::move(vocab)), config_(std::move(config)) {
  if (!vocab_) throw InvalidInput("ngram: vocabulary required");
  if (config_.order < 1) throw InvalidInput("ngram: order must be >= 1");
  if (!(config_.smoothing > 0.0)) throw InvalidInput("ngram: smoothing must be > 0");
  if (corpus.empty()) throw InvalidInput("ngram: empty corpus");

  const auto n_vocab = static_cast<Eigen::Index>(vocab_->size());
  embeddings_.resize(n_vocab, kEmbeddingDim);
  const std::uint64_t base = context_hash(RandomState{config_.embedding_seed}, {});
  for (Eigen::Index t = 0; t < n_vocab; ++t) {
    const std::uint64_t h = context_hash_extend(base, static_cast<TokenId>(t));
    for (Eigen::Index j = 0; j < kEmbeddingDim; ++j)
      embeddings_(t, j) = 2.0 * hashed_uniform(h, static_cast<std::uint64_t>(j)) - 1.0;
  }

  std::unordered_map<Key, std::unordered_map<TokenId, double>, KeyHash> raw;
  for (const auto& seq : corpus) {
    validate_sequence(seq, *vocab_);
    const Segments segs = split_prompt(seq);
    std::size_t delims = 0;
    for (std::size_t pos = 0; pos + 1 < seq.size(); ++pos) {
      if (config_.align_delimiter && pos >= seq.prompt_len && seq.tokens[pos] == *config_.align_delimiter)
        ++delims;
      for (auto& key : context_keys(seq, pos, segs, delims)) raw[std::move(key)][seq.tokens[pos + 1]] += 1.0;
    }
  }
  table_.reserve(raw.size());
  for (auto& [key, by_token] : raw) {
    Counts c;
    c.entries.assign(by_token.begin(), by_token.end());
    std::sort(c.entries.begin(), c.entries.end());
    for (const auto& e : c.entries) c.total += e.second;
    table_.emplace(key, std::move(c));
  }
}

NGramModel::Segments NGramModel::split_prompt(const TokenSequence& seq) const {
  Segments segs;
  if (!config_.align_delimiter) return segs;
  std::vector<TokenId> cur;
  for (TokenId t : seq.prompt()) {
    if (t == *config_.align_delimiter) {
      segs.parts.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back(t);
    }
  }
  if (!cur.empty()) segs.parts.push_back(std::move(cur));
  return segs;
}

std::vector<NGramModel::Key> NGramModel::context_keys(const TokenSequence& seq, std::size_t pos,
                                                      const Segments& segs,
                                                      std::size_t delims_seen) const {
  Key head;
  if (config_.align_delimiter && pos + 1 >= seq.prompt_len) {
    head.push_back(kAlignedMarker);
    if (delims_seen < segs.parts.size()) {
      const auto& part = segs.parts[delims_seen];
      head.insert(head.end(), part.begin(), part.end());
    } else {
      head.push_back(kPastPromptMarker);
    }
    head.push_back(kSeparator);
  }
  const std::size_t longest = std::min<std::size_t>(static_cast<std::size_t>(config_.order - 1), pos + 1);
  std::vector<Key> keys;
  keys.reserve(longest + 1);
  for (std::size_t len = longest + 1; len-- > 0;) {
    Key k = head;
    k.insert(k.end(), seq.tokens.begin() + static_cast<std::ptrdiff_t>(pos + 1 - len),
             seq.tokens.begin() + static_cast<std::ptrdiff_t>(pos + 1));
    keys.push_back(std::move(k));
    if (!config_.backoff) break;
  }
  return keys;
}

Vector NGramModel::logits_at(const std::vector<Key>& keys) const {
  const auto n_vocab = static_cast<double>(vocab_->size());
  const double k = config_.smoothing;
  const Counts* counts = nullptr;
  for (const auto& key : keys) {
    auto it = table_.find(key);
    if (it != table_.end() && it->second.total > 0.0) {
      counts = &it->second;
      break;
    }
  }
  const double total = counts ? counts->total : 0.0;
  const double denom = total + k * n_vocab;
  Vector logits = Vector::Constant(static_cast<Eigen::Index>(vocab_->size()), std::log(k / denom));
  if (counts) {
    for (const auto& [tok, c] : counts->entries) logits(tok) = std::log((c + k) / denom);
  }
  return logits;
}

Vector NGramModel::hidden_at(const TokenSequence& seq, std::size_t pos, const Vector& logits) const {
  const std::size_t span = std::min<std::size_t>(static_cast<std::size_t>(std::max(1, config_.order - 1)), pos + 1);
  Vector h(kHiddenDim);
  Vector mean = Vector::Zero(kEmbeddingDim);
  for (std::size_t i = pos + 1 - span; i <= pos; ++i) mean += embeddings_.row(seq.tokens[i]).transpose();
  h.head(kEmbeddingDim) = mean / static_cast<double>(span);
  const Vector logp = log_softmax(logits, 1.0);
  h(kEmbeddingDim) = entropy(softmax(logits, 1.0));
  h(kEmbeddingDim + 1) = logp.maxCoeff();
  return h;
}

LmOutput NGramModel::forward(const TokenSequence& seq) const {
  const auto n = static_cast<Eigen::Index>(seq.size());
  LmOutput out{Matrix(static_cast<Eigen::Index>(vocab_->size()), n), Matrix(kHiddenDim, n)};
  const Segments segs = split_prompt(seq);
  std::size_t delims = 0;
  for (std::size_t pos = 0; pos < seq.size(); ++pos) {
    if (config_.align_delimiter && pos >= seq.prompt_len && seq.tokens[pos] == *config_.align_delimiter)
      ++delims;
    const Vector logits = logits_at(context_keys(seq, pos, segs, delims));
    out.hidden.col(static_cast<Eigen::Index>(pos)) = hidden_at(seq, pos, logits);
    out.logits.col(static_cast<Eigen::Index>(pos)) = logits;
  }
  return out;
}

StepOutput NGramModel::step(const TokenSequence& seq) const {
  const std::size_t pos = seq.size() - 1;
  std::size_t delims = 0;
  if (config_.align_delimiter) {
    for (std::size_t i = seq.prompt_len; i <= pos; ++i) delims += seq.tokens[i] == *config_.align_delimiter;
  }
  Vector logits = logits_at(context_keys(seq, pos, split_prompt(seq), delims));
  Vector hidden = hidden_at(seq, pos, logits);
  return {std::move(logits), std::move(hidden)};
}

std::shared_ptr<const NGramModel> train_ngram(VocabPtr vocab, const std::vector<TokenSequence>& corpus,
                                              int order, double smoothing, NGramConfig extra) {
  extra.order = order;
  extra.smoothing = smoothing;
  return std::make_shared<const NGramModel>(std::move(vocab), std::move(extra), corpus);
}

PerturbedModel::PerturbedModel(ModelHandle base, PerturbSpec spec, std::string name)
    : base_(std::move(base)), spec_(std::move(spec)), name_(std::move(name)) {
  if (!base_) throw InvalidInput("perturb: base model required");
  if (!(spec_.noise_scale >= 0.0)) throw InvalidInput("perturb: noise_scale must be >= 0");
  for (const auto& [tok, offset] : spec_.bias_tokens) {
    if (!base_->vocab().contains(tok)) throw InvalidInput("perturb: bias token outside vocabulary");
    if (!std::isfinite(offset)) throw InvalidInput("perturb: bias offset must be finite");
  }
  if (name_.empty()) name_ = base_->name() + "+perturb";
}

void PerturbedModel::perturb(Eigen::Ref<Vector> logits, std::uint64_t prefix_hash) const {
  if (spec_.noise_scale > 0.0) {
    for (Eigen::Index i = 0; i < logits.size(); ++i) {
      const auto k = static_cast<std::uint64_t>(i);
      const double u1 = hashed_uniform(prefix_hash, 2 * k);
      const double u2 = hashed_uniform(prefix_hash, 2 * k + 1);
      const double z = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
      logits(i) += spec_.noise_scale * z;
    }
  }
  for (const auto& [tok, offset] : spec_.bias_tokens) logits(tok) += offset;
}

double PerturbedModel::noise_summary(const Vector& base_logits, const Vector& logits) const {
  if (spec_.is_identity()) return 0.0;
  return 0.5 * (softmax(logits, 1.0) - softmax(base_logits, 1.0)).cwiseAbs().sum();
}

LmOutput PerturbedModel::forward(const TokenSequence& seq) const {
  LmOutput base = base_->forward(seq);
  LmOutput out{base.logits, Matrix(hidden_dim(), base.positions())};
  std::uint64_t h = context_hash(RandomState{spec_.seed}, {}, Stream::kPerturb);
  for (Eigen::Index pos = 0; pos < base.positions(); ++pos) {
    h = context_hash_extend(h, seq.tokens[static_cast<std::size_t>(pos)]);
    perturb(out.logits.col(pos), h);
    out.hidden.col(pos).head(base_->hidden_dim()) = base.hidden.col(pos);
    out.hidden(base_->hidden_dim(), pos) = noise_summary(base.logits.col(pos), out.logits.col(pos));
  }
  return out;
}

StepOutput PerturbedModel::step(const TokenSequence& seq) const {
  StepOutput base = base_->step(seq);
  StepOutput out{base.logits, Vector(hidden_dim())};
  perturb(out.logits, context_hash(RandomState{spec_.seed}, seq.tokens, Stream::kPerturb));
  out.hidden.head(base_->hidden_dim()) = base.hidden;
  out.hidden(base_->hidden_dim()) = noise_summary(base.logits, out.logits);
  return out;
}

ModelHandle make_draft(ModelHandle target, PerturbSpec spec) {
  return std::make_shared<const PerturbedModel>(std::move(target), std::move(spec));
}

ScriptedModel::ScriptedModel(VocabPtr vocab, LogitsFn fn, std::string name)
    : vocab_(std::move(vocab)), fn_(std::move(fn)), name_(std::move(name)) {
  if (!vocab_ || !fn_) throw InvalidInput("scripted: vocabulary and callback required");
}

StepOutput ScriptedModel::at(const TokenSequence& seq, std::size_t pos) const {
  Vector logits = fn_(std::span<const TokenId>(seq.tokens.data(), pos + 1), seq.prompt_len);
  if (logits.size() != static_cast<Eigen::Index>(vocab_->size()))
    throw InvalidInput("scripted: callback returned wrong logit count");
  Vector hidden(3);
  hidden << static_cast<double>(pos + 1), static_cast<double>(seq.tokens[pos]),
      static_cast<double>(pos + 1 >= seq.prompt_len ? pos + 1 - seq.prompt_len : 0);
  return {std::move(logits), std::move(hidden)};
}

LmOutput ScriptedModel::forward(const TokenSequence& seq) const {
  const auto n = static_cast<Eigen::Index>(seq.size());
  LmOutput out{Matrix(static_cast<Eigen::Index>(vocab_->size()), n), Matrix(3, n)};
  for (Eigen::Index pos = 0; pos < n; ++pos) {
    StepOutput s = at(seq, static_cast<std::size_t>(pos));
    out.logits.col(pos) = s.logits;
    out.hidden.col(pos) = s.hidden;
  }
  return out;
}

StepOutput ScriptedModel::step(const TokenSequence& seq) const { return at(seq, seq.size() - 1); }

Vector one_hot_logits(std::size_t vocab_size, TokenId id, double strength) {
  Vector v = Vector::Zero(static_cast<Eigen::Index>(vocab_size));
  v(id) = strength;
  return v;
}

}  // namespace specjudge

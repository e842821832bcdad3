// Copyright 2026 The specjudge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "specjudge/core.hpp"

namespace specjudge {

/// Seed fixed for one generation or one mining episode.
struct RandomState {
  std::uint64_t seed = 0;
  bool operator==(const RandomState&) const = default;
};

/// Independent noise streams derived from one RandomState. kToken is the
/// stream used for the next-token draw itself.
enum class Stream : std::uint64_t { kToken = 0, kResidual = 1, kAccept = 2, kPerturb = 3 };

/// FNV-1a over (seed, stream-mixed) followed by every context id.
std::uint64_t context_hash(RandomState state, std::span<const TokenId> context,
                           Stream stream = Stream::kToken);

/// Folds one more token into a context hash.
std::uint64_t context_hash_extend(std::uint64_t h, TokenId token) noexcept;

/// Keyed uniform for element `i` under an already-computed context hash.
double hashed_uniform(std::uint64_t context_hash, std::uint64_t i) noexcept;

/// SplitMix64 finalizer; maps a counter to a well-mixed 64-bit value.
std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Uniform in the open interval (0, 1) from the top 52 bits.
double unit_open(std::uint64_t bits) noexcept;

/// Small portable generator for data synthesis (SplitMix64 stream). Unlike
/// the std distributions its output is identical on every platform.
class SplitMixRng {
 public:
  explicit SplitMixRng(std::uint64_t seed) : state_(seed) {}
  std::uint64_t next() noexcept {
    state_ += 0x9e3779b97f4a7c15ULL;
    return splitmix64(state_ - 0x9e3779b97f4a7c15ULL);
  }
  /// Uniform in [lo, hi].
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  /// Uniform in (0, 1).
  double uniform() noexcept { return unit_open(next()); }
  double normal();

 private:
  std::uint64_t state_;
};

/// Standard Gumbel noise g_i = -ln(-ln u_i), where u_i is derived from the
/// hash of (state, context, i). Same inputs always give the same vector.
Vector gumbel_noise(RandomState state, std::span<const TokenId> context, Eigen::Index n,
                    Stream stream = Stream::kToken);

/// A single uniform in (0,1) keyed on (state, context, stream).
double keyed_uniform(RandomState state, std::span<const TokenId> context, Stream stream);

/// Greedy (temperature 0) or seed-conditioned Gumbel-max sampling.
struct DecodeMode {
  double temperature = 0.0;
  RandomState state{};

  bool greedy() const noexcept { return temperature == 0.0; }
  static DecodeMode Greedy() { return {}; }
  static DecodeMode Sampled(RandomState s, double t) { return {t, s}; }
};

/// argmax(log softmax(logits, T) + gumbel_noise(state, context)), or plain
/// argmax when T == 0. Pure in its arguments.
TokenId choose_token(const Vector& logits, const DecodeMode& mode,
                     std::span<const TokenId> context, Stream stream = Stream::kToken);

/// Draws the next token of `context` from `model` under `mode`.
TokenId sample_next(const LanguageModel& model, const TokenSequence& context, RandomState state,
                    double temperature);
TokenId decode_next(const LanguageModel& model, const TokenSequence& context,
                    const DecodeMode& mode);

/// Appends up to `max_new` tokens, stopping after end-of-sequence.
TokenSequence generate(const LanguageModel& model, TokenSequence context, std::size_t max_new,
                       const DecodeMode& mode);

enum class VerifyKind { kAccept, kReject };

struct VerifyDecision {
  VerifyKind kind = VerifyKind::kAccept;
  std::optional<TokenId> replacement;
  std::optional<Vector> residual;

  bool accepted() const noexcept { return kind == VerifyKind::kAccept; }
};

/// The drafted token has zero draft probability.
class InvalidDraft : public InvalidInput {
 public:
  using InvalidInput::InvalidInput;
};

/// normalize(max(0, p_target - p_draft)).
Vector residual_distribution(const Vector& p_target, const Vector& p_draft);

/// Standard speculative-sampling verification. Accepts iff
/// u < min(1, p_target[d] / p_draft[d]); otherwise the replacement is drawn
/// from the residual by Gumbel-max on the kResidual stream of `state`.
VerifyDecision verify_token(const Vector& p_target, const Vector& p_draft, TokenId drafted,
                            double u, RandomState state, std::span<const TokenId> context);

}  // namespace specjudge

// Copyright 2026 The specjudge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "specjudge/core.hpp"
#include "specjudge/judge.hpp"
#include "specjudge/sampling.hpp"

namespace specjudge {

/// Acceptance rule applied on top of lossless verification. TopK and Judge
/// only act where the lossless rule would reject.
struct PolicyConfig {
  enum class Kind { kLossless, kTopK, kJudge };

  Kind kind = Kind::kLossless;
  int k = 1;
  std::shared_ptr<const JudgeModel> judge;
  /// Replaces the judge's calibrated threshold when set.
  std::optional<double> threshold;

  static PolicyConfig Lossless() { return {}; }
  static PolicyConfig TopK(int k);
  static PolicyConfig Judge(std::shared_ptr<const JudgeModel> judge, std::optional<double> threshold = {});

  double effective_threshold() const;
  /// "lossless", "topk" or "judge".
  std::string name() const;
  /// K for TopK, tau for Judge, 0 for Lossless.
  double param() const;
  void validate() const;
};

/// How sampled-mode verification decides. kCoupled accepts a drafted token iff
/// it equals the target's own Gumbel-max draw for the same prefix and seed, so
/// the output is pathwise identical to target-only sampling. kResidual is the
/// classic u < p/q test with a residual redraw; it preserves the output law
/// but not the individual sample path.
enum class SampledRule { kCoupled, kResidual };

struct EngineConfig {
  std::size_t window = 64;
  /// Response tokens to emit at most.
  std::size_t max_tokens = 256;
  DecodeMode mode;
  SampledRule sampled_rule = SampledRule::kCoupled;

  void validate() const;
};

/// One speculation/verification cycle.
struct CycleStats {
  std::size_t drafted = 0;
  std::size_t accepted_draft = 0;
  /// Drafted tokens accepted only because the lossy policy overrode a
  /// rejection (judge or top-K).
  std::size_t judge_overrides = 0;
  bool correction_emitted = false;
  bool bonus_emitted = false;
  /// Window indices of those overrides.
  std::vector<std::size_t> override_positions;

  std::size_t emitted() const noexcept {
    return accepted_draft + (correction_emitted ? 1 : 0) + (bonus_emitted ? 1 : 0);
  }
  bool operator==(const CycleStats&) const = default;
};

struct DraftWindow {
  std::vector<TokenId> tokens;
  /// Column i: draft logits that produced token i.
  Matrix logits;
  /// Column i: draft hidden state at token i's own position.
  Matrix hidden;

  std::size_t size() const noexcept { return tokens.size(); }
};

/// Drafts up to `window` tokens autoregressively, stopping early only after
/// end-of-sequence.
DraftWindow draft_window(const LanguageModel& draft, const TokenSequence& context, std::size_t window,
                         const DecodeMode& mode);

struct VerifyResult {
  std::vector<TokenId> accepted;
  /// Correction after a rejection, or the bonus token after a full window.
  std::optional<TokenId> next;
  CycleStats stats;
};

/// One parallel target pass over context + window, then a left-to-right scan.
/// The last drafted position is never overridden by the judge. `allow_bonus`
/// is cleared when the caller has no room for one more token.
VerifyResult verify_window(const LanguageModel& target, const TokenSequence& context, const DraftWindow& window,
                           const PolicyConfig& policy, const EngineConfig& cfg, bool allow_bonus = true);

struct DecodeResult {
  TokenSequence sequence;
  std::vector<CycleStats> cycles;
};

/// Draft/verify until end-of-sequence or max_tokens response tokens.
DecodeResult spec_decode(const TokenSequence& prompt, const LanguageModel& draft, const LanguageModel& target,
                         const PolicyConfig& policy, const EngineConfig& cfg);

/// Target-only decoding under the same limits, the reference for lossless runs.
TokenSequence target_decode(const TokenSequence& prompt, const LanguageModel& target, const EngineConfig& cfg);

/// Emitted tokens (accepted, corrections and bonuses) per target pass.
double accepted_per_cycle(const std::vector<CycleStats>& cycles);

}  // namespace specjudge

// Copyright 2026 The specjudge Authors
// SPDX-License-Identifier: Apache-2.0

#include "specjudge/engine.hpp"

#include <cmath>

#include "specjudge/math.hpp"

namespace specjudge {
namespace {

std::span<const TokenId> prefix_span(const std::vector<TokenId>& tokens, std::size_t n) {
  return {tokens.data(), n};
}

}  // namespace

PolicyConfig PolicyConfig::TopK(int k) {
  PolicyConfig p;
  p.kind = Kind::kTopK;
  p.k = k;
  p.validate();
  return p;
}

PolicyConfig PolicyConfig::Judge(std::shared_ptr<const JudgeModel> judge, std::optional<double> threshold) {
  PolicyConfig p;
  p.kind = Kind::kJudge;
  p.judge = std::move(judge);
  p.threshold = threshold;
  p.validate();
  return p;
}

double PolicyConfig::effective_threshold() const {
  if (threshold) return *threshold;
  return judge ? judge->threshold : 0.0;
}

std::string PolicyConfig::name() const {
  switch (kind) {
    case Kind::kLossless: return "lossless";
    case Kind::kTopK: return "topk";
    case Kind::kJudge: return "judge";
  }
  return "";
}

double PolicyConfig::param() const {
  switch (kind) {
    case Kind::kLossless: return 0.0;
    case Kind::kTopK: return static_cast<double>(k);
    case Kind::kJudge: return effective_threshold();
  }
  return 0.0;
}

void PolicyConfig::validate() const {
  if (kind == Kind::kTopK && k < 1) throw InvalidInput("policy: K must be >= 1");
  if (kind == Kind::kJudge) {
    if (!judge) throw InvalidInput("policy: judge model required");
    const double tau = effective_threshold();
    if (!(tau > 0.0 && tau < 1.0)) throw InvalidInput("policy: threshold must lie in (0, 1)");
  }
}

void EngineConfig::validate() const {
  if (window < 1) throw InvalidInput("engine: window must be >= 1");
  if (mode.temperature < 0.0 || !std::isfinite(mode.temperature))
    throw InvalidInput("engine: temperature must be finite and >= 0");
}

DraftWindow draft_window(const LanguageModel& draft, const TokenSequence& context, std::size_t window,
                         const DecodeMode& mode) {
  if (window < 1) throw InvalidInput("draft_window: window must be >= 1");
  const auto n_vocab = static_cast<Eigen::Index>(draft.vocab().size());
  const TokenId eos = draft.vocab().eos();
  DraftWindow out;
  out.logits.resize(n_vocab, static_cast<Eigen::Index>(window));
  out.hidden.resize(draft.hidden_dim(), static_cast<Eigen::Index>(window));
  TokenSequence seq = context;
  StepOutput s = forward_step(draft, seq);
  while (out.tokens.size() < window) {
    const auto i = static_cast<Eigen::Index>(out.tokens.size());
    const TokenId t = choose_token(s.logits, mode, seq.tokens);
    out.logits.col(i) = s.logits;
    out.tokens.push_back(t);
    seq.tokens.push_back(t);
    s = forward_step(draft, seq);
    out.hidden.col(i) = s.hidden;
    if (t == eos) break;
  }
  const auto n = static_cast<Eigen::Index>(out.tokens.size());
  out.logits.conservativeResize(Eigen::NoChange, n);
  out.hidden.conservativeResize(Eigen::NoChange, n);
  return out;
}

VerifyResult verify_window(const LanguageModel& target, const TokenSequence& context, const DraftWindow& window,
                           const PolicyConfig& policy, const EngineConfig& cfg, bool allow_bonus) {
  if (window.size() == 0) throw InvalidInput("verify_window: empty window");
  if (context.empty()) throw InvalidInput("verify_window: empty context");
  policy.validate();
  const TokenId eos = target.vocab().eos();
  const bool residual = !cfg.mode.greedy() && cfg.sampled_rule == SampledRule::kResidual;

  TokenSequence full = context;
  full.tokens.insert(full.tokens.end(), window.tokens.begin(), window.tokens.end());
  const LmOutput out = forward_parallel(target, full);
  const std::size_t base = context.size();
  const std::size_t n = window.size();

  VerifyResult res;
  res.stats.drafted = n;
  for (std::size_t i = 0; i < n; ++i) {
    const auto col = static_cast<Eigen::Index>(base - 1 + i);
    const Vector logits = out.logits.col(col);
    const auto prefix = prefix_span(full.tokens, base + i);
    const TokenId drafted = window.tokens[i];

    // Lossless decision and the token it would emit instead.
    bool accept = false;
    TokenId replacement = drafted;
    if (residual) {
      const Vector p = softmax(logits, cfg.mode.temperature);
      const Vector q = softmax(Vector(window.logits.col(static_cast<Eigen::Index>(i))), cfg.mode.temperature);
      const double u = keyed_uniform(cfg.mode.state, prefix, Stream::kAccept);
      const VerifyDecision d = verify_token(p, q, drafted, u, cfg.mode.state, prefix);
      accept = d.accepted();
      if (!accept) replacement = *d.replacement;
    } else {
      replacement = choose_token(logits, cfg.mode, prefix);
      accept = replacement == drafted;
    }

    if (!accept) {
      bool override = false;
      if (policy.kind == PolicyConfig::Kind::kTopK) {
        override = rank_of(logits, drafted) < policy.k;
      } else if (policy.kind == PolicyConfig::Kind::kJudge && i + 1 < n) {
        const Vector f = assemble_features(Vector(window.hidden.col(static_cast<Eigen::Index>(i))),
                                           Vector(out.hidden.col(col + 1)), policy.judge->config);
        override = predict_importance(*policy.judge, f) < policy.effective_threshold();
      }
      if (!override) {
        res.next = replacement;
        res.stats.correction_emitted = true;
        return res;
      }
      ++res.stats.judge_overrides;
      res.stats.override_positions.push_back(i);
    }
    res.accepted.push_back(drafted);
    ++res.stats.accepted_draft;
  }
  if (allow_bonus && res.accepted.back() != eos) {
    const auto col = static_cast<Eigen::Index>(base + n - 1);
    res.next = choose_token(Vector(out.logits.col(col)), cfg.mode, full.tokens);
    res.stats.bonus_emitted = true;
  }
  return res;
}

DecodeResult spec_decode(const TokenSequence& prompt, const LanguageModel& draft, const LanguageModel& target,
                         const PolicyConfig& policy, const EngineConfig& cfg) {
  if (prompt.empty()) throw InvalidInput("spec_decode: empty prompt");
  cfg.validate();
  policy.validate();
  if (&draft.vocab() != &target.vocab() && draft.vocab().tokens() != target.vocab().tokens())
    throw InvalidInput("spec_decode: draft and target vocabularies differ");
  if (policy.kind == PolicyConfig::Kind::kJudge) policy.judge->check_models(draft.hidden_dim(), target.hidden_dim());
  validate_sequence(prompt, target.vocab());

  const TokenId eos = target.vocab().eos();
  DecodeResult res;
  res.sequence = prompt;
  res.sequence.prompt_len = prompt.size();
  std::size_t emitted = 0;
  while (emitted < cfg.max_tokens) {
    if (emitted > 0 && res.sequence.tokens.back() == eos) break;
    const std::size_t room = cfg.max_tokens - emitted;
    const DraftWindow win = draft_window(draft, res.sequence, std::min(cfg.window, room), cfg.mode);
    VerifyResult v = verify_window(target, res.sequence, win, policy, cfg, win.size() < room);
    for (TokenId t : v.accepted) res.sequence.tokens.push_back(t);
    if (v.next) res.sequence.tokens.push_back(*v.next);
    emitted += v.stats.emitted();
    res.cycles.push_back(std::move(v.stats));
  }
  return res;
}

TokenSequence target_decode(const TokenSequence& prompt, const LanguageModel& target, const EngineConfig& cfg) {
  TokenSequence p = prompt;
  p.prompt_len = p.size();
  return generate(target, std::move(p), cfg.max_tokens, cfg.mode);
}

double accepted_per_cycle(const std::vector<CycleStats>& cycles) {
  if (cycles.empty()) throw InvalidInput("accepted_per_cycle: no cycles");
  std::size_t total = 0;
  for (const auto& c : cycles) total += c.emitted();
  return static_cast<double>(total) / static_cast<double>(cycles.size());
}

}  // namespace specjudge

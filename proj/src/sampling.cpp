// Copyright 2026 The specjudge Authors
// SPDX-License-Identifier: Apache-2.0

#include "specjudge/sampling.hpp"

#include <cmath>
#include <limits>

#include "specjudge/math.hpp"

namespace specjudge {
namespace {

constexpr std::uint64_t kFnvOffset = 0xcbf29ce484222325ULL;
constexpr std::uint64_t kFnvPrime = 0x100000001b3ULL;

std::uint64_t fnv_bytes(std::uint64_t h, std::uint64_t value, int nbytes) noexcept {
  for (int b = 0; b < nbytes; ++b) {
    h ^= (value >> (8 * b)) & 0xffU;
    h *= kFnvPrime;
  }
  return h;
}

constexpr double kProbTolerance = 1e-9;

void require_distribution(const Vector& p, const char* what) {
  if (!p.allFinite() || (p.array() < 0.0).any() || std::abs(p.sum() - 1.0) > kProbTolerance)
    throw InvalidInput(std::string(what) + " is not a probability vector");
}

}  // namespace

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double unit_open(std::uint64_t bits) noexcept {
  return (static_cast<double>(bits >> 12) + 0.5) * 0x1.0p-52;
}

std::uint64_t context_hash_extend(std::uint64_t h, TokenId token) noexcept {
  return fnv_bytes(h, static_cast<std::uint32_t>(token), 4);
}

double hashed_uniform(std::uint64_t context_hash, std::uint64_t i) noexcept {
  return unit_open(splitmix64(fnv_bytes(context_hash, i, 8)));
}

std::uint64_t context_hash(RandomState state, std::span<const TokenId> context, Stream stream) {
  const auto tag = static_cast<std::uint64_t>(stream);
  const std::uint64_t seed = tag == 0 ? state.seed : state.seed ^ (0x9e3779b97f4a7c15ULL * tag);
  std::uint64_t h = fnv_bytes(kFnvOffset, seed, 8);
  for (TokenId t : context) h = context_hash_extend(h, t);
  return h;
}

std::int64_t SplitMixRng::uniform_int(std::int64_t lo, std::int64_t hi) {
  if (hi < lo) throw InvalidInput("uniform_int: empty range");
  const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
  if (span == 0) return static_cast<std::int64_t>(next());
  const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % span;
  std::uint64_t x;
  do {
    x = next();
  } while (x >= limit);
  return lo + static_cast<std::int64_t>(x % span);
}

double SplitMixRng::normal() {
  const double u1 = uniform();
  const double u2 = uniform();
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
}

Vector gumbel_noise(RandomState state, std::span<const TokenId> context, Eigen::Index n,
                    Stream stream) {
  const std::uint64_t prefix = context_hash(state, context, stream);
  Vector g(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = hashed_uniform(prefix, static_cast<std::uint64_t>(i));
    g(i) = -std::log(-std::log(u));
  }
  return g;
}

double keyed_uniform(RandomState state, std::span<const TokenId> context, Stream stream) {
  return hashed_uniform(context_hash(state, context, stream), 0);
}

TokenId choose_token(const Vector& logits, const DecodeMode& mode, std::span<const TokenId> context,
                     Stream stream) {
  if (mode.greedy()) return static_cast<TokenId>(argmax(logits));
  if (!(mode.temperature > 0.0)) throw InvalidInput("temperature must be >= 0");
  const Vector scores =
      log_softmax(logits, mode.temperature) + gumbel_noise(mode.state, context, logits.size(), stream);
  return static_cast<TokenId>(argmax(scores));
}

TokenId decode_next(const LanguageModel& model, const TokenSequence& context,
                    const DecodeMode& mode) {
  return choose_token(forward_step(model, context).logits, mode, context.tokens);
}

TokenId sample_next(const LanguageModel& model, const TokenSequence& context, RandomState state,
                    double temperature) {
  return decode_next(model, context, DecodeMode::Sampled(state, temperature));
}

TokenSequence generate(const LanguageModel& model, TokenSequence context, std::size_t max_new,
                       const DecodeMode& mode) {
  const TokenId eos = model.vocab().eos();
  for (std::size_t i = 0; i < max_new; ++i) {
    const TokenId next = decode_next(model, context, mode);
    context.tokens.push_back(next);
    if (next == eos) break;
  }
  return context;
}

Vector residual_distribution(const Vector& p_target, const Vector& p_draft) {
  if (p_target.size() != p_draft.size()) throw InvalidInput("residual: size mismatch");
  Vector r = (p_target - p_draft).cwiseMax(0.0);
  const double mass = r.sum();
  if (!(mass > 0.0)) throw InvalidInput("residual: distributions are identical");
  return r / mass;
}

VerifyDecision verify_token(const Vector& p_target, const Vector& p_draft, TokenId drafted,
                            double u, RandomState state, std::span<const TokenId> context) {
  if (p_target.size() != p_draft.size()) throw InvalidInput("verify_token: size mismatch");
  require_distribution(p_target, "p_target");
  require_distribution(p_draft, "p_draft");
  if (drafted < 0 || drafted >= p_draft.size()) throw InvalidInput("verify_token: drafted id out of range");
  const double q = p_draft(drafted);
  if (!(q > 0.0)) throw InvalidDraft("verify_token: draft assigns zero probability to drafted token");
  if (!(u >= 0.0 && u < 1.0)) throw InvalidInput("verify_token: u must lie in [0, 1)");

  if (u < std::min(1.0, p_target(drafted) / q)) return {VerifyKind::kAccept, std::nullopt, std::nullopt};

  Vector residual = residual_distribution(p_target, p_draft);
  Vector scores = gumbel_noise(state, context, residual.size(), Stream::kResidual);
  for (Eigen::Index i = 0; i < residual.size(); ++i) {
    scores(i) = residual(i) > 0.0 ? scores(i) + std::log(residual(i))
                                  : -std::numeric_limits<double>::infinity();
  }
  return {VerifyKind::kReject, static_cast<TokenId>(argmax(scores)), std::move(residual)};
}

}  // namespace specjudge

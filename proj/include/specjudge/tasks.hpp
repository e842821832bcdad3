// Copyright 2026 The specjudge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "specjudge/core.hpp"

namespace specjudge {

/// Either an integer or "no answer could be extracted".
struct Answer {
  std::optional<std::int64_t> number;

  static Answer None() { return {}; }
  static Answer Number(std::int64_t v) { return {v}; }
  bool has_value() const noexcept { return number.has_value(); }
  std::string to_string() const;

  bool operator==(const Answer&) const = default;
};

/// Integer following the last "final answer is"; NoAnswer when the marker is
/// missing or the following word is not an integer.
Answer extract_answer(std::string_view text);
Answer extract_answer(const Vocab& vocab, std::span<const TokenId> response);

/// Numbers compare by value. Anything involving NoAnswer is not equivalent,
/// including NoAnswer vs NoAnswer.
bool answers_equivalent(const Answer& a, const Answer& b);

/// Pluggable equivalence for richer tasks.
using AnswerEquivalence = std::function<bool(const Answer&, const Answer&)>;

struct Task {
  std::string id;
  TokenSequence prompt;
  Answer oracle;
  std::size_t max_response_len = 1;
  std::uint64_t seed = 0;
};

// Synthetic chain arithmetic -------------------------------------------------

enum class ArithOp { kAdd, kSubtract, kMultiply };

struct ArithStep {
  ArithOp op = ArithOp::kAdd;
  int operand = 1;
  bool operator==(const ArithStep&) const = default;
};

struct ArithmeticProblem {
  int start = 1;
  std::vector<ArithStep> steps;

  std::int64_t evaluate() const;
  bool operator==(const ArithmeticProblem&) const = default;
};

/// Every intermediate value of a generated problem stays in [0, kMaxValue].
inline constexpr int kMaxValue = 99;
inline constexpr int kMinSteps = 2;
inline constexpr int kMaxSteps = 8;

/// Closed vocabulary of the arithmetic family: the numbers 0..kMaxValue,
/// instruction and response words, and "<eos>".
VocabPtr arithmetic_vocab();

/// Filler words that open a step sentence; swapping them never changes the
/// arithmetic.
const std::vector<std::string>& filler_words();

/// Start value and operands in 1..9; operations are drawn so that the
/// running value stays within [0, kMaxValue]. Deterministic per seed.
ArithmeticProblem gen_arithmetic_problem(std::uint64_t seed, int num_steps);

/// "Start with 7 . Add 3 . Multiply by 2 . What is the result ?"
std::string render_prompt(const ArithmeticProblem& problem);

/// Worked response, one sentence per prompt instruction:
/// "we have 7 . now we get 7 plus 3 is 10 . then we get 10 times 2 is 20 .
///  final answer is 20 . <eos>". `fillers[i]` opens step sentence i.
std::string render_solution(const ArithmeticProblem& problem, const std::vector<std::string>& fillers);

std::size_t default_max_response_len(std::size_t num_steps);

Task make_arithmetic_task(const ArithmeticProblem& problem, const Vocab& vocab, std::string id,
                          std::uint64_t seed);
Task gen_arithmetic_task(std::uint64_t seed, int num_steps, const Vocab& vocab);

/// `count` tasks with step counts drawn in [min_steps, max_steps]; task i
/// has id "arith-<seed>-<i>".
std::vector<Task> gen_arithmetic_tasks(std::uint64_t seed, std::size_t count, const Vocab& vocab,
                                       int min_steps = kMinSteps, int max_steps = kMaxSteps);

void write_tasks(const std::vector<Task>& tasks, const Vocab& vocab, std::ostream& out);
std::vector<Task> read_tasks(std::istream& in, const Vocab& vocab);
void save_tasks(const std::vector<Task>& tasks, const Vocab& vocab, const std::string& path);
std::vector<Task> load_tasks(const std::string& path, const Vocab& vocab);

struct CorpusOptions {
  std::uint64_t seed = 0;
  /// Random multi-step worked examples.
  std::size_t transcripts = 2000;
  /// Include one single-step example per (value, op, operand) fact, repeated
  /// with every filler, so the model sees every arithmetic fact it can reach.
  bool fact_table = true;
  /// Copies of each fact per filler word, in filler_words() order.
  std::vector<int> filler_copies{4, 2, 1};
  /// Extra copies of each fact with the result off by +1 and by -1. They give
  /// the model plausible runner-up digits the way a real LM has them.
  int off_by_one_copies = 1;
  /// Filler sampling weights for the random transcripts.
  std::vector<double> filler_weights{0.5, 0.3, 0.2};
};

std::vector<TokenSequence> build_arithmetic_corpus(const Vocab& vocab, const CorpusOptions& options);

void write_corpus(const std::vector<TokenSequence>& corpus, const Vocab& vocab, std::ostream& out);
std::vector<TokenSequence> read_corpus(std::istream& in, const Vocab& vocab);

}  // namespace specjudge

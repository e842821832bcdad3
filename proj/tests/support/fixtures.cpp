// Copyright 2026 The specjudge Authors
// SPDX-License-Identifier: Apache-2.0

#include "fixtures.hpp"

#include <algorithm>

namespace specjudge::testing {

const ArithModels& arith() {
  static const ArithModels models = build_arith_models();
  return models;
}

VocabPtr tiny_vocab() {
  static const VocabPtr v = std::make_shared<const Vocab>(
      std::vector<std::string>{"a", "b", "c", "go", "final", "answer", "is", "1", "2", "3", "<eos>"}, "<eos>");
  return v;
}

TokenSequence tiny_seq(const std::string& response_words) {
  const auto& v = *tiny_vocab();
  TokenSequence s{{v.id("go")}, 1};
  for (TokenId t : v.encode(response_words)) s.tokens.push_back(t);
  return s;
}

Task tiny_task(std::size_t max_response_len) {
  Task t;
  t.id = "tiny";
  t.prompt = TokenSequence{{tiny_vocab()->id("go")}, 1};
  t.oracle = Answer::Number(1);
  t.max_response_len = max_response_len;
  return t;
}

namespace {

// Next token of the target for a response prefix.
TokenId tiny_target_next(std::span<const TokenId> response) {
  const auto& v = *tiny_vocab();
  const TokenId a = v.id("a"), b = v.id("b");
  const std::size_t n = response.size();
  if (n < 2) return a;
  const bool flipped = response[0] == b && response[1] == b;
  switch (n) {
    case 2: return v.id("final");
    case 3: return v.id("answer");
    case 4: return v.id("is");
    case 5: return flipped ? v.id("2") : v.id("1");
    default: return v.eos();
  }
}

}  // namespace

ScriptedPair self_correcting_pair() {
  auto vocab = tiny_vocab();
  const auto V = vocab->size();
  auto target = std::make_shared<const ScriptedModel>(
      vocab,
      [V](std::span<const TokenId> prefix, std::size_t prompt_len) {
        if (prefix.size() < prompt_len) return Vector(Vector::Zero(static_cast<Eigen::Index>(V)));
        return one_hot_logits(V, tiny_target_next(prefix.subspan(prompt_len)));
      },
      "tiny-target");
  auto draft = std::make_shared<const ScriptedModel>(
      vocab,
      [V](std::span<const TokenId> prefix, std::size_t prompt_len) {
        if (prefix.size() < prompt_len) return Vector(Vector::Zero(static_cast<Eigen::Index>(V)));
        const auto response = prefix.subspan(prompt_len);
        if (response.size() < 2) return one_hot_logits(V, tiny_vocab()->id("b"));
        return one_hot_logits(V, tiny_target_next(response));
      },
      "tiny-draft");
  return {draft, target};
}

ScriptedPair arith_scripted_pair(const std::string& kind) {
  const auto& m = arith();
  const ModelHandle target = m.target;
  const VocabPtr vocab = m.vocab;
  const TokenId now = vocab->id("now"), then = vocab->id("then"), is = vocab->id("is");
  const bool filler = kind == "filler";
  // The draft copies the target's logits and edits one position kind.
  auto draft = std::make_shared<const ScriptedModel>(
      vocab,
      [target, vocab, filler, now, then, is](std::span<const TokenId> prefix, std::size_t prompt_len) {
        TokenSequence seq{std::vector<TokenId>(prefix.begin(), prefix.end()), std::min(prompt_len, prefix.size())};
        Vector logits = forward_step(*target, seq).logits;
        if (prefix.size() < prompt_len) return logits;
        const auto response = prefix.subspan(prompt_len);
        const TokenId top = static_cast<TokenId>(std::max_element(logits.data(), logits.data() + logits.size()) -
                                                 logits.data());
        if (filler && top == now) {
          std::swap(logits(now), logits(then));
        } else if (!filler && !response.empty() && response.back() == is &&
                   std::count(response.begin(), response.end(), is) == 1) {
          // First "is": push the runner-up digit ahead of the target's result.
          const int value = std::stoi(vocab->text(top));
          const TokenId wrong = vocab->id(std::to_string(value + 1 <= kMaxValue ? value + 1 : value - 1));
          logits(wrong) = logits(top) + 1.0;
        }
        return logits;
      },
      "arith-scripted-" + kind);
  return {draft, target};
}

ModelHandle identity_draft(ModelHandle target) {
  return std::make_shared<const PerturbedModel>(std::move(target), PerturbSpec{}, "identity");
}

}  // namespace specjudge::testing

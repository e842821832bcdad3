// Copyright 2026 The specjudge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>

#include "specjudge/tasks.hpp"
#include "specjudge/toy_models.hpp"

namespace specjudge {

/// Ready-made draft/target pair for the arithmetic task family.
///
/// The target is an order-6 n-gram with backoff, aligned on "." so every
/// response sentence can read its prompt instruction. The draft is the target
/// plus a logit bias toward the filler "then" and prefix-keyed noise.
struct ArithModels {
  VocabPtr vocab;
  std::shared_ptr<const NGramModel> target;
  ModelHandle draft;
};

struct ArithDraftOptions {
  double noise_scale = 0.8;
  double then_bias = 0.7;
  std::uint64_t seed = 1;
};

NGramConfig arith_target_config(const Vocab& vocab);
PerturbSpec arith_draft_spec(const Vocab& vocab, const ArithDraftOptions& options = {});

std::shared_ptr<const NGramModel> train_arith_target(VocabPtr vocab, const std::vector<TokenSequence>& corpus);

ArithModels build_arith_models(const CorpusOptions& corpus = {}, const ArithDraftOptions& draft = {});

}  // namespace specjudge

// Copyright 2026 The specjudge Authors
// SPDX-License-Identifier: Apache-2.0

#include "specjudge/presets.hpp"

namespace specjudge {

NGramConfig arith_target_config(const Vocab& vocab) {
  NGramConfig cfg;
  cfg.order = 6;
  cfg.smoothing = 0.01;
  cfg.backoff = true;
  cfg.align_delimiter = vocab.id(".");
  cfg.name = "arith-target";
  return cfg;
}

PerturbSpec arith_draft_spec(const Vocab& vocab, const ArithDraftOptions& options) {
  PerturbSpec spec;
  spec.noise_scale = options.noise_scale;
  spec.seed = options.seed;
  if (options.then_bias != 0.0) spec.bias_tokens[vocab.id("then")] = options.then_bias;
  return spec;
}

std::shared_ptr<const NGramModel> train_arith_target(VocabPtr vocab, const std::vector<TokenSequence>& corpus) {
  NGramConfig cfg = arith_target_config(*vocab);
  return std::make_shared<const NGramModel>(std::move(vocab), std::move(cfg), corpus);
}

ArithModels build_arith_models(const CorpusOptions& corpus, const ArithDraftOptions& draft) {
  ArithModels m;
  m.vocab = arithmetic_vocab();
  m.target = train_arith_target(m.vocab, build_arithmetic_corpus(*m.vocab, corpus));
  m.draft = std::make_shared<const PerturbedModel>(m.target, arith_draft_spec(*m.vocab, draft), "arith-draft");
  return m;
}

}  // namespace specjudge

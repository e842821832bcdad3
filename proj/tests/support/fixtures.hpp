// Copyright 2026 The specjudge Authors
// SPDX-License-Identifier: Apache-2.0
//
// Shared models and scenarios for the unit and acceptance tests.

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "specjudge/core.hpp"
#include "specjudge/presets.hpp"
#include "specjudge/tasks.hpp"
#include "specjudge/toy_models.hpp"

namespace specjudge::testing {

/// Built once per process: arithmetic target plus the default draft.
const ArithModels& arith();

/// Small closed vocabulary for hand-built scenarios:
///   a b c go final answer is 1 2 3 <eos>
VocabPtr tiny_vocab();

/// Prompt "go" with the given response words appended.
TokenSequence tiny_seq(const std::string& response_words);

/// Task with prompt "go", oracle 1.
Task tiny_task(std::size_t max_response_len = 8);

/// Hand-built pair on tiny_vocab(). The target answers "a a final answer is 1"
/// and self-corrects any single "b" among the first two response tokens; only
/// "b b" flips the answer to 2. The draft proposes "b" at both positions and
/// follows the target elsewhere.
struct ScriptedPair {
  ModelHandle draft;
  ModelHandle target;
};
ScriptedPair self_correcting_pair();

/// Pair on the arithmetic vocabulary whose draft differs from the target only
/// at one response position kind. `kind` is "filler" (draft says "then" where
/// the target says "now") or "digit" (draft's first step result is off by one).
ScriptedPair arith_scripted_pair(const std::string& kind);

/// Draft that mirrors `target` exactly (noise 0, no bias).
ModelHandle identity_draft(ModelHandle target);

}  // namespace specjudge::testing

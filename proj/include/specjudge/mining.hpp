// Copyright 2026 The specjudge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "specjudge/core.hpp"
#include "specjudge/remote.hpp"
#include "specjudge/sampling.hpp"
#include "specjudge/tasks.hpp"

namespace specjudge {

/// One mismatch found while mining, with its importance label.
///
/// `position` is the index inside the response. `context` holds the prefix
/// the mismatch was observed on (prompt plus response[0, position)). The four
/// hidden vectors are what assemble_features() draws on: *_hidden encode the
/// drafted token (state at the drafted token's own position), prev_* are the
/// states at position-1 that predicted it. A hidden vector is empty when the
/// corresponding model was not available during mining.
struct MismatchRecord {
  std::string task_id;
  std::size_t position = 0;
  TokenId target_token = 0;
  TokenId draft_token = 0;
  bool important = false;
  std::size_t prompt_len = 0;
  std::vector<TokenId> context;
  Vector draft_hidden;
  Vector target_hidden;
  Vector prev_draft_hidden;
  Vector prev_target_hidden;

  bool operator==(const MismatchRecord& o) const;
};

struct MiningConfig {
  DecodeMode mode;
  /// Response budget T_max. Zero uses the task's own max_response_len.
  std::size_t max_response_len = 0;
  /// Safety cap on search iterations. Zero means 4x the response budget.
  std::size_t max_rollbacks = 0;
};

enum class MiningStatus { kOk, kSkipped, kTruncated };

struct MiningResult {
  MiningStatus status = MiningStatus::kOk;
  std::string diagnostic;
  std::vector<MismatchRecord> records;
  /// Target response the search started from, and the answer it gives.
  TokenSequence reference;
  Answer answer;
  /// Sequence adopted when the search ended.
  TokenSequence final_sequence;
  /// Every candidate sequence built by a replacement, in test order.
  std::vector<TokenSequence> trials;
  std::size_t iterations = 0;

  std::size_t important_count() const;
};

/// Produces target continuations during mining: the local target model, or a
/// remote generation API.
class ContinuationSource {
 public:
  virtual ~ContinuationSource() = default;
  /// Appends at most `max_new` tokens to `context`, stopping after EOS.
  virtual TokenSequence extend(const TokenSequence& context, std::size_t max_new, const DecodeMode& mode) const = 0;
};

class LocalContinuation final : public ContinuationSource {
 public:
  explicit LocalContinuation(ModelHandle target);
  TokenSequence extend(const TokenSequence& context, std::size_t max_new, const DecodeMode& mode) const override;

 private:
  ModelHandle target_;
};

/// Sends the text of the context to an OpenAI-compatible endpoint.
class RemoteContinuation final : public ContinuationSource {
 public:
  RemoteContinuation(RemoteEndpoint endpoint, VocabPtr vocab);
  TokenSequence extend(const TokenSequence& context, std::size_t max_new, const DecodeMode& mode) const override;

 private:
  RemoteEndpoint endpoint_;
  VocabPtr vocab_;
};

/// Models a mining run uses. `feature_target` supplies target hidden states
/// and may be null, in which case target features are left empty.
struct MiningModels {
  ModelHandle draft;
  std::shared_ptr<const ContinuationSource> source;
  ModelHandle feature_target;

  static MiningModels Local(ModelHandle draft, ModelHandle target);
};

/// Response indices whose token differs from the draft's choice given the
/// same prefix, from one parallel draft pass over the whole sequence.
std::vector<std::size_t> mismatch_indices(const LanguageModel& draft, const TokenSequence& seq,
                                          const DecodeMode& mode = DecodeMode::Greedy());

/// Semi-greedy search for important tokens. Starting from the target
/// response, every earliest remaining mismatch is replaced by the draft token
/// and the target continues; a replacement that keeps the answer is
/// unimportant and is adopted, otherwise it is important and discarded.
MiningResult mine_important(const Task& task, const MiningModels& models, const MiningConfig& cfg,
                            const AnswerEquivalence& equivalent = answers_equivalent);
MiningResult mine_important(const Task& task, ModelHandle draft, ModelHandle target, const MiningConfig& cfg);

/// Baseline: each mismatch of the original target response is replaced and
/// tested in isolation, nothing is adopted.
MiningResult mine_naive(const Task& task, const MiningModels& models, const MiningConfig& cfg,
                        const AnswerEquivalence& equivalent = answers_equivalent);
MiningResult mine_naive(const Task& task, ModelHandle draft, ModelHandle target, const MiningConfig& cfg);

enum class Miner { kImportant, kNaive };

/// Mines every task on up to `jobs` threads; results keep task order.
std::vector<MiningResult> mine_tasks(const std::vector<Task>& tasks, const MiningModels& models,
                                     const MiningConfig& cfg, Miner miner = Miner::kImportant, unsigned jobs = 1);

/// Records of every non-skipped result, in task order.
std::vector<MismatchRecord> collect_records(const std::vector<MiningResult>& results);

/// Newline-delimited JSON, one record per line. Every hidden variant must have
/// the same length across all records, otherwise DataError.
void write_dataset(const std::vector<MismatchRecord>& records, std::ostream& out);
std::vector<MismatchRecord> read_dataset(std::istream& in);
void export_dataset(const std::vector<MismatchRecord>& records, const std::string& path);
std::vector<MismatchRecord> import_dataset(const std::string& path);

}  // namespace specjudge

// Copyright 2026 The specjudge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <unordered_map>
#include <vector>

#include "specjudge/core.hpp"

namespace specjudge {

struct TopEntry {
  TokenId id = 0;
  double logit = 0.0;
  bool operator==(const TopEntry&) const = default;
};

/// One model's view of one position: the top-m logits (descending, ties by
/// lower id), the softmax mass of everything else, and the hidden state.
struct TraceSide {
  std::vector<TopEntry> top;
  double tail_mass = 0.0;
  Vector hidden;
};

struct TraceRecord {
  std::size_t seq = 0;
  std::size_t pos = 0;
  TokenId token = 0;
  bool prompt = false;
  TraceSide draft;
  TraceSide target;
};

/// Recorded draft and target outputs for one or more token sequences. Every
/// position is stored, prompt included, so any prefix of a recorded sequence
/// can be replayed. Positions of a sequence are contiguous from 0.
struct Trace {
  std::vector<TraceRecord> records;
};

TraceSide compress_row(const Vector& logits, const Vector& hidden, std::size_t top_m);

/// Inverse of compress_row: retained logits verbatim, the tail mass spread
/// uniformly over the remaining ids, never above the smallest retained logit.
Vector expand_logits(const TraceSide& side, std::size_t vocab_size);

Trace record_trace(const LanguageModel& draft, const LanguageModel& target, const TokenSequence& seq,
                   std::size_t top_m, std::size_t seq_index = 0);

/// Appends `more` with its sequence ids shifted past those already in `into`.
void merge_trace(Trace& into, const Trace& more);

void write_trace(const Trace& trace, std::ostream& out);
Trace read_trace(std::istream& in);
void save_trace(const Trace& trace, const std::string& path);
Trace load_trace(const std::string& path);

enum class TraceSideKind { kDraft, kTarget };

/// Replays one side of a trace. Querying a context that is not a prefix of a
/// recorded sequence raises DataError.
class TraceModel final : public LanguageModel {
 public:
  TraceModel(const Trace& trace, VocabPtr vocab, TraceSideKind side, std::string name = {});

  const std::string& name() const override { return name_; }
  Eigen::Index hidden_dim() const override { return hidden_dim_; }
  const Vocab& vocab() const override { return *vocab_; }
  LmOutput forward(const TokenSequence& seq) const override;
  StepOutput step(const TokenSequence& seq) const override;

  std::size_t sequence_count() const noexcept { return sequences_.size(); }

 private:
  struct Recorded {
    std::vector<TokenId> tokens;
    std::vector<TraceSide> rows;
  };
  const Recorded& locate(const TokenSequence& seq) const;

  VocabPtr vocab_;
  std::string name_;
  Eigen::Index hidden_dim_ = 0;
  std::vector<Recorded> sequences_;
  /// Hash of every recorded prefix -> (sequence index). Collisions are
  /// resolved by comparing tokens.
  std::unordered_multimap<std::uint64_t, std::size_t> prefixes_;
};

}  // namespace specjudge

// Copyright 2026 The specjudge Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <sstream>

#include "specjudge/mining.hpp"
#include "support/fixtures.hpp"

namespace specjudge {
namespace {

using testing::arith;

MiningConfig greedy() { return MiningConfig{DecodeMode::Greedy()}; }

// Checks every structural invariant of one mine_important result.
void expect_well_formed(const MiningResult& r, const Task& task, std::size_t budget) {
  if (r.status == MiningStatus::kSkipped) return;
  const auto& v = *arith().vocab;
  EXPECT_TRUE(answers_equivalent(extract_answer(v, r.final_sequence.response()), r.answer)) << task.id;
  EXPECT_LE(r.final_sequence.response_len(), budget);
  EXPECT_EQ(r.trials.size(), r.records.size());
  for (std::size_t i = 0; i < r.records.size(); ++i) {
    const auto& rec = r.records[i];
    if (i > 0) EXPECT_GT(rec.position, r.records[i - 1].position) << task.id;
    EXPECT_NE(rec.draft_token, rec.target_token);
    EXPECT_EQ(rec.context.size(), rec.prompt_len + rec.position);
    EXPECT_LE(r.trials[i].response_len(), budget);
    EXPECT_EQ(rec.important,
              !answers_equivalent(extract_answer(v, r.trials[i].response()), r.answer));
    // The final sequence keeps adopted draft tokens and the target's token at
    // important positions.
    const TokenId kept = r.final_sequence.tokens[r.final_sequence.prompt_len + rec.position];
    EXPECT_EQ(kept, rec.important ? rec.target_token : rec.draft_token) << task.id << " pos " << rec.position;
    EXPECT_TRUE(std::equal(rec.context.begin(), rec.context.end(), r.final_sequence.tokens.begin()));
  }
}

TEST(MismatchIndices, IdenticalDraftHasNone) {
  const auto draft = testing::identity_draft(arith().target);
  for (const auto& t : gen_arithmetic_tasks(3, 20, *arith().vocab)) {
    const TokenSequence y = generate(*arith().target, t.prompt, t.max_response_len, DecodeMode::Greedy());
    EXPECT_TRUE(mismatch_indices(*draft, y).empty());
  }
}

TEST(MismatchIndices, ParallelPassMatchesStepwiseLoop) {
  const auto& m = arith();
  for (const auto& t : gen_arithmetic_tasks(4, 100, *m.vocab)) {
    const TokenSequence y = generate(*m.target, t.prompt, t.max_response_len, DecodeMode::Greedy());
    std::vector<std::size_t> expected;
    for (std::size_t i = 0; i < y.response_len(); ++i) {
      if (greedy_next(*m.draft, y.prefix(y.prompt_len + i)) != y.tokens[y.prompt_len + i]) expected.push_back(i);
    }
    EXPECT_EQ(mismatch_indices(*m.draft, y), expected) << t.id;
  }
}

TEST(MismatchIndices, RequiresPrompt) {
  EXPECT_THROW(mismatch_indices(*arith().draft, TokenSequence{{1, 2}, 0}), InvalidInput);
  const TokenSequence prompt_only{{1, 2}, 2};
  EXPECT_TRUE(mismatch_indices(*arith().draft, prompt_only).empty());
}

TEST(MineImportant, FillerSwapsAreUnimportant) {
  const auto pair = testing::arith_scripted_pair("filler");
  const Task task = gen_arithmetic_task(17, 4, *arith().vocab);
  const MiningResult r = mine_important(task, pair.draft, pair.target, greedy());
  ASSERT_EQ(r.status, MiningStatus::kOk);
  ASSERT_FALSE(r.records.empty());
  for (const auto& rec : r.records) {
    EXPECT_FALSE(rec.important);
    EXPECT_EQ(arith().vocab->text(rec.draft_token), "then");
  }
  expect_well_formed(r, task, task.max_response_len);
}

TEST(MineImportant, DigitSwapIsImportant) {
  const auto pair = testing::arith_scripted_pair("digit");
  const auto& v = *arith().vocab;
  const Task task = gen_arithmetic_task(17, 4, v);
  const MiningResult r = mine_important(task, pair.draft, pair.target, greedy());
  ASSERT_EQ(r.status, MiningStatus::kOk);
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_TRUE(r.records[0].important);
  EXPECT_EQ(r.final_sequence, r.reference);
  EXPECT_EQ(extract_answer(v, r.final_sequence.response()), task.oracle);
}

TEST(MineImportant, FindsInteractionTheNaiveMinerMisses) {
  const auto pair = testing::self_correcting_pair();
  const Task task = testing::tiny_task();
  const MiningResult naive = mine_naive(task, pair.draft, pair.target, greedy());
  ASSERT_EQ(naive.records.size(), 2u);
  EXPECT_EQ(naive.important_count(), 0u);
  const MiningResult full = mine_important(task, pair.draft, pair.target, greedy());
  ASSERT_EQ(full.records.size(), 2u);
  EXPECT_FALSE(full.records[0].important);
  EXPECT_TRUE(full.records[1].important);
  EXPECT_EQ(testing::tiny_vocab()->decode(full.final_sequence.response()), "b a final answer is 1 <eos>");
}

TEST(MineImportant, PostconditionHoldsOnManyTasks) {
  const auto& m = arith();
  const auto tasks = gen_arithmetic_tasks(31, 60, *m.vocab);
  const auto results = mine_tasks(tasks, MiningModels::Local(m.draft, m.target), greedy(), Miner::kImportant, 4);
  std::size_t records = 0;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    EXPECT_EQ(results[i].status, MiningStatus::kOk);
    expect_well_formed(results[i], tasks[i], tasks[i].max_response_len);
    records += results[i].records.size();
  }
  EXPECT_GT(records, 0u);
}

TEST(MineImportant, SampledModeIsDeterministicAndWellFormed) {
  const auto& m = arith();
  MiningConfig cfg{DecodeMode::Sampled(RandomState{5}, 0.7)};
  for (const auto& task : gen_arithmetic_tasks(32, 15, *m.vocab, 2, 4)) {
    const MiningResult a = mine_important(task, m.draft, m.target, cfg);
    const MiningResult b = mine_important(task, m.draft, m.target, cfg);
    EXPECT_EQ(a.records, b.records);
    EXPECT_EQ(a.final_sequence, b.final_sequence);
    expect_well_formed(a, task, task.max_response_len);
  }
}

TEST(MineImportant, JobsDoNotChangeResults) {
  const auto& m = arith();
  const auto tasks = gen_arithmetic_tasks(33, 24, *m.vocab);
  const auto models = MiningModels::Local(m.draft, m.target);
  const auto one = collect_records(mine_tasks(tasks, models, greedy(), Miner::kImportant, 1));
  const auto many = collect_records(mine_tasks(tasks, models, greedy(), Miner::kImportant, 6));
  EXPECT_EQ(one, many);
}

TEST(MineImportant, SkipsTaskWithoutReferenceAnswer) {
  const auto pair = testing::self_correcting_pair();
  const MiningResult r = mine_important(testing::tiny_task(2), pair.draft, pair.target, greedy());
  EXPECT_EQ(r.status, MiningStatus::kSkipped);
  EXPECT_FALSE(r.diagnostic.empty());
  EXPECT_TRUE(r.records.empty());
  EXPECT_TRUE(collect_records({r}).empty());
}

TEST(MineImportant, RollbackCapTruncates) {
  const auto pair = testing::self_correcting_pair();
  MiningConfig cfg = greedy();
  cfg.max_rollbacks = 1;
  const MiningResult r = mine_important(testing::tiny_task(), pair.draft, pair.target, cfg);
  EXPECT_EQ(r.status, MiningStatus::kTruncated);
  EXPECT_EQ(r.records.size(), 1u);
  EXPECT_EQ(collect_records({r}).size(), 1u);
}

TEST(MineImportant, ResponseBudgetCapsContinuations) {
  const auto& m = arith();
  const Task task = gen_arithmetic_task(40, 3, *m.vocab);
  MiningConfig cfg = greedy();
  cfg.max_response_len = 12;
  const MiningResult r = mine_important(task, m.draft, m.target, cfg);
  EXPECT_EQ(r.status, MiningStatus::kSkipped);
  EXPECT_EQ(r.reference.response_len(), 12u);
}

TEST(MineImportant, RecordsCarryBothModelsHiddenStates) {
  const auto& m = arith();
  const auto tasks = gen_arithmetic_tasks(41, 10, *m.vocab);
  const auto recs = collect_records(mine_tasks(tasks, MiningModels::Local(m.draft, m.target), greedy()));
  ASSERT_FALSE(recs.empty());
  for (const auto& r : recs) {
    TokenSequence prev{r.context, r.prompt_len};
    EXPECT_EQ(r.prev_draft_hidden, m.draft->step(prev).hidden);
    EXPECT_EQ(r.target_hidden, m.target->step(prev.appended(r.draft_token)).hidden);
    EXPECT_EQ(r.draft_hidden.size(), m.draft->hidden_dim());
    EXPECT_EQ(r.prev_target_hidden.size(), m.target->hidden_dim());
  }
  MiningModels no_target = MiningModels::Local(m.draft, m.target);
  no_target.feature_target = nullptr;
  const auto bare = collect_records(mine_tasks(tasks, no_target, greedy()));
  ASSERT_EQ(bare.size(), recs.size());
  EXPECT_EQ(bare[0].target_hidden.size(), 0);
}

TEST(Dataset, RoundTripsThroughJsonLinesAndFiles) {
  const auto& m = arith();
  const auto recs =
      collect_records(mine_tasks(gen_arithmetic_tasks(42, 10, *m.vocab), MiningModels::Local(m.draft, m.target), greedy()));
  ASSERT_FALSE(recs.empty());
  std::stringstream buf;
  write_dataset(recs, buf);
  EXPECT_EQ(read_dataset(buf), recs);

  const auto path = (std::filesystem::temp_directory_path() / "specjudge_dataset_test.jsonl").string();
  export_dataset(recs, path);
  EXPECT_EQ(import_dataset(path), recs);
  std::remove(path.c_str());
}

TEST(Dataset, EmptyAndInvalidInput) {
  std::stringstream empty;
  EXPECT_TRUE(read_dataset(empty).empty());
  EXPECT_THROW(import_dataset("/nonexistent/dir/data.jsonl"), DataError);

  MismatchRecord a;
  a.task_id = "t";
  a.target_token = 1;
  a.draft_token = 2;
  a.prompt_len = 1;
  a.context = {0};
  a.draft_hidden = Vector::Zero(3);
  MismatchRecord b = a;
  b.draft_hidden = Vector::Zero(4);
  std::stringstream out;
  EXPECT_THROW(write_dataset({a, b}, out), DataError);

  for (const char* bad : {"{}\n", "[\n",
                          R"({"task_id":"t","position":0,"target_token":1,"draft_token":1,"important":true,"prompt_len":1,"context":[0],"draft_hidden":[],"target_hidden":[],"prev_draft_hidden":[],"prev_target_hidden":[]})",
                          R"({"task_id":"t","position":3,"target_token":1,"draft_token":2,"important":true,"prompt_len":1,"context":[0],"draft_hidden":[],"target_hidden":[],"prev_draft_hidden":[],"prev_target_hidden":[]})"}) {
    std::stringstream in(bad);
    EXPECT_THROW(read_dataset(in), DataError) << bad;
  }
}

}  // namespace
}  // namespace specjudge

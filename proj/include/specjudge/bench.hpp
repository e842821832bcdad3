// Copyright 2026 The specjudge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "specjudge/engine.hpp"
#include "specjudge/tasks.hpp"

namespace specjudge {

struct BenchRow {
  std::string policy;
  double param = 0.0;
  double accuracy = 0.0;
  double accepted_per_cycle = 0.0;
  std::size_t cycles = 0;
  std::size_t tokens = 0;
  std::uint64_t seed = 0;
  /// Tasks whose decode raised an error; they count as incorrect.
  std::size_t failed = 0;

  bool operator==(const BenchRow&) const = default;
};

struct BenchOptions {
  /// Window, mode and token cap. The cap per task is the smaller of
  /// engine.max_tokens and the task's max_response_len.
  EngineConfig engine;
  unsigned jobs = 1;
};

/// Per-task outcome of one policy.
struct TaskOutcome {
  TokenSequence output;
  Answer answer;
  bool correct = false;
  std::vector<CycleStats> cycles;
  std::string error;
};

/// The engine configuration used for one task: the token cap is clamped to
/// the task and, in sampled mode, the seed is mixed with the task seed.
EngineConfig task_engine_config(const Task& task, const EngineConfig& base);

std::vector<TaskOutcome> decode_tasks(const std::vector<Task>& tasks, const LanguageModel& draft,
                                      const LanguageModel& target, const PolicyConfig& policy,
                                      const BenchOptions& opt);

BenchRow summarize(const PolicyConfig& policy, const std::vector<Task>& tasks,
                   const std::vector<TaskOutcome>& outcomes, std::uint64_t seed);

/// One row per policy, sorted by policy kind (lossless, topk, judge) and then
/// by parameter.
std::vector<BenchRow> run_benchmark(const std::vector<Task>& tasks, const LanguageModel& draft,
                                    const LanguageModel& target, const std::vector<PolicyConfig>& policies,
                                    const BenchOptions& opt);

/// One judge row per threshold in `grid`.
std::vector<BenchRow> sweep_thresholds(const std::vector<Task>& tasks, const LanguageModel& draft,
                                       const LanguageModel& target, std::shared_ptr<const JudgeModel> judge,
                                       const std::vector<double>& grid, const BenchOptions& opt);

enum class ReportFormat { kCsv, kJson };

/// CSV header: policy,param,accuracy,accepted_per_cycle,cycles,tokens,seed.
void write_report(const std::vector<BenchRow>& rows, std::ostream& out, ReportFormat format = ReportFormat::kCsv);
std::vector<BenchRow> read_report(std::istream& in, ReportFormat format = ReportFormat::kCsv);
void emit_report(const std::vector<BenchRow>& rows, const std::string& path, ReportFormat format = ReportFormat::kCsv);

/// Shortest decimal that parses back to the same double.
std::string format_double(double v);

/// Compares the (accepted_per_cycle, accuracy) frontiers of two row sets at
/// `levels` acceptance levels spaced evenly over the overlap of their
/// accepted_per_cycle ranges. At level L each side scores the best accuracy
/// among its rows with accepted_per_cycle >= L; `a` dominates when its score
/// is at least the other's.
struct FrontierComparison {
  std::vector<double> levels;
  std::vector<double> a_accuracy;
  std::vector<double> b_accuracy;
  std::size_t a_dominates = 0;
};
FrontierComparison compare_frontiers(const std::vector<BenchRow>& a, const std::vector<BenchRow>& b,
                                     std::size_t levels = 5);

}  // namespace specjudge

// Copyright 2026 The specjudge Authors
// SPDX-License-Identifier: Apache-2.0

#include "specjudge/bench.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "specjudge/parallel.hpp"

namespace specjudge {
namespace {

int kind_order(const std::string& policy) {
  if (policy == "lossless") return 0;
  if (policy == "topk") return 1;
  if (policy == "judge") return 2;
  return 3;
}

constexpr const char* kHeader = "policy,param,accuracy,accepted_per_cycle,cycles,tokens,seed";

double parse_double(std::string_view s) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw DataError("report: bad number '" + std::string(s) + "'");
  return v;
}

template <class T>
T parse_unsigned(std::string_view s) {
  T v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) throw DataError("report: bad integer '" + std::string(s) + "'");
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

EngineConfig task_engine_config(const Task& task, const EngineConfig& base) {
  EngineConfig cfg = base;
  cfg.max_tokens = std::min(base.max_tokens, task.max_response_len);
  if (!cfg.mode.greedy()) cfg.mode.state.seed = splitmix64(base.mode.state.seed ^ task.seed);
  return cfg;
}

std::vector<TaskOutcome> decode_tasks(const std::vector<Task>& tasks, const LanguageModel& draft,
                                      const LanguageModel& target, const PolicyConfig& policy,
                                      const BenchOptions& opt) {
  policy.validate();
  if (policy.kind == PolicyConfig::Kind::kJudge) policy.judge->check_models(draft.hidden_dim(), target.hidden_dim());
  std::vector<TaskOutcome> out(tasks.size());
  parallel_for(tasks.size(), opt.jobs, [&](std::size_t i) {
    const Task& task = tasks[i];
    TaskOutcome& o = out[i];
    try {
      DecodeResult r = spec_decode(task.prompt, draft, target, policy, task_engine_config(task, opt.engine));
      o.answer = extract_answer(target.vocab(), r.sequence.response());
      o.correct = answers_equivalent(o.answer, task.oracle);
      o.output = std::move(r.sequence);
      o.cycles = std::move(r.cycles);
    } catch (const std::exception& e) {
      o.error = e.what();
    }
  });
  return out;
}

BenchRow summarize(const PolicyConfig& policy, const std::vector<Task>& tasks,
                   const std::vector<TaskOutcome>& outcomes, std::uint64_t seed) {
  if (tasks.empty()) throw InvalidInput("benchmark: empty task set");
  BenchRow row;
  row.policy = policy.name();
  row.param = policy.param();
  row.seed = seed;
  std::size_t correct = 0;
  for (const auto& o : outcomes) {
    if (!o.error.empty()) {
      ++row.failed;
      continue;
    }
    correct += o.correct ? 1 : 0;
    row.cycles += o.cycles.size();
    for (const auto& c : o.cycles) row.tokens += c.emitted();
  }
  row.accuracy = static_cast<double>(correct) / static_cast<double>(tasks.size());
  row.accepted_per_cycle = row.cycles ? static_cast<double>(row.tokens) / static_cast<double>(row.cycles) : 0.0;
  return row;
}

std::vector<BenchRow> run_benchmark(const std::vector<Task>& tasks, const LanguageModel& draft,
                                    const LanguageModel& target, const std::vector<PolicyConfig>& policies,
                                    const BenchOptions& opt) {
  if (tasks.empty()) throw InvalidInput("benchmark: empty task set");
  std::vector<BenchRow> rows;
  for (const auto& p : policies)
    rows.push_back(summarize(p, tasks, decode_tasks(tasks, draft, target, p, opt), opt.engine.mode.state.seed));
  std::stable_sort(rows.begin(), rows.end(), [](const BenchRow& a, const BenchRow& b) {
    const int ka = kind_order(a.policy), kb = kind_order(b.policy);
    return ka != kb ? ka < kb : a.param < b.param;
  });
  return rows;
}

std::vector<BenchRow> sweep_thresholds(const std::vector<Task>& tasks, const LanguageModel& draft,
                                       const LanguageModel& target, std::shared_ptr<const JudgeModel> judge,
                                       const std::vector<double>& grid, const BenchOptions& opt) {
  if (grid.empty()) throw InvalidInput("sweep_thresholds: empty grid");
  std::vector<PolicyConfig> policies;
  for (double tau : grid) {
    if (!(tau > 0.0 && tau < 1.0)) throw InvalidInput("sweep_thresholds: thresholds must lie in (0, 1)");
    policies.push_back(PolicyConfig::Judge(judge, tau));
  }
  return run_benchmark(tasks, draft, target, policies, opt);
}

void write_report(const std::vector<BenchRow>& rows, std::ostream& out, ReportFormat format) {
  if (format == ReportFormat::kJson) {
    nlohmann::ordered_json doc = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
      doc.push_back({{"policy", r.policy},
                     {"param", r.param},
                     {"accuracy", r.accuracy},
                     {"accepted_per_cycle", r.accepted_per_cycle},
                     {"cycles", r.cycles},
                     {"tokens", r.tokens},
                     {"seed", r.seed},
                     {"failed", r.failed}});
    }
    out << doc.dump(2) << '\n';
    return;
  }
  out << kHeader << '\n';
  for (const auto& r : rows) {
    out << r.policy << ',' << format_double(r.param) << ',' << format_double(r.accuracy) << ','
        << format_double(r.accepted_per_cycle) << ',' << r.cycles << ',' << r.tokens << ',' << r.seed << '\n';
  }
}

std::vector<BenchRow> read_report(std::istream& in, ReportFormat format) {
  std::vector<BenchRow> rows;
  if (format == ReportFormat::kJson) {
    try {
      for (const auto& r : nlohmann::json::parse(in)) {
        rows.push_back({r.at("policy").get<std::string>(), r.at("param").get<double>(), r.at("accuracy").get<double>(),
                        r.at("accepted_per_cycle").get<double>(), r.at("cycles").get<std::size_t>(),
                        r.at("tokens").get<std::size_t>(), r.at("seed").get<std::uint64_t>(),
                        r.value("failed", std::size_t{0})});
      }
    } catch (const nlohmann::json::exception& e) {
      throw DataError(std::string("report: ") + e.what());
    }
    return rows;
  }
  std::string line;
  if (!std::getline(in, line) || line != kHeader) throw DataError("report: missing or unexpected header");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string_view> f;
    std::string_view rest(line);
    for (;;) {
      const auto comma = rest.find(',');
      f.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (f.size() != 7) throw DataError("report: expected 7 fields, got " + std::to_string(f.size()));
    BenchRow r;
    r.policy = std::string(f[0]);
    r.param = parse_double(f[1]);
    r.accuracy = parse_double(f[2]);
    r.accepted_per_cycle = parse_double(f[3]);
    r.cycles = parse_unsigned<std::size_t>(f[4]);
    r.tokens = parse_unsigned<std::size_t>(f[5]);
    r.seed = parse_unsigned<std::uint64_t>(f[6]);
    rows.push_back(std::move(r));
  }
  return rows;
}

void emit_report(const std::vector<BenchRow>& rows, const std::string& path, ReportFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  write_report(rows, out, format);
  if (!out) throw DataError("failed writing " + path);
}

FrontierComparison compare_frontiers(const std::vector<BenchRow>& a, const std::vector<BenchRow>& b,
                                     std::size_t levels) {
  FrontierComparison cmp;
  if (a.empty() || b.empty() || levels == 0) return cmp;
  auto range = [](const std::vector<BenchRow>& rows) {
    double lo = rows.front().accepted_per_cycle, hi = lo;
    for (const auto& r : rows) {
      lo = std::min(lo, r.accepted_per_cycle);
      hi = std::max(hi, r.accepted_per_cycle);
    }
    return std::pair{lo, hi};
  };
  const auto [alo, ahi] = range(a);
  const auto [blo, bhi] = range(b);
  const double lo = std::max(alo, blo), hi = std::min(ahi, bhi);
  if (hi < lo) return cmp;
  auto best = [](const std::vector<BenchRow>& rows, double level) {
    double acc = -1.0;
    for (const auto& r : rows)
      if (r.accepted_per_cycle >= level) acc = std::max(acc, r.accuracy);
    return acc;
  };
  for (std::size_t j = 0; j < levels; ++j) {
    const double level =
        levels == 1 ? lo : lo + (hi - lo) * static_cast<double>(j) / static_cast<double>(levels - 1);
    cmp.levels.push_back(level);
    cmp.a_accuracy.push_back(best(a, level));
    cmp.b_accuracy.push_back(best(b, level));
    if (cmp.a_accuracy.back() >= cmp.b_accuracy.back()) ++cmp.a_dominates;
  }
  return cmp;
}

}  // namespace specjudge

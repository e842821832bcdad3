// Copyright 2026 The specjudge Authors
// SPDX-License-Identifier: Apache-2.0

#include "specjudge/mining.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

#include "specjudge/parallel.hpp"

namespace specjudge {
namespace {

struct Mismatch {
  std::size_t index;  // inside the response
  TokenId draft_token;
};

std::vector<Mismatch> find_mismatches(const LanguageModel& draft, const TokenSequence& seq, const DecodeMode& mode) {
  if (seq.prompt_len == 0) throw InvalidInput("mismatch_indices: sequence needs a non-empty prompt");
  std::vector<Mismatch> out;
  if (seq.response_len() == 0) return out;
  const LmOutput fwd = forward_parallel(draft, seq);
  for (std::size_t p = seq.prompt_len - 1; p + 1 < seq.size(); ++p) {
    const Vector col = fwd.logits.col(static_cast<Eigen::Index>(p));
    const TokenId choice = choose_token(col, mode, std::span<const TokenId>(seq.tokens.data(), p + 1));
    if (choice != seq.tokens[p + 1]) out.push_back({p + 1 - seq.prompt_len, choice});
  }
  return out;
}

struct Search {
  const Task& task;
  const MiningModels& models;
  const MiningConfig& cfg;
  const AnswerEquivalence& equivalent;
  std::size_t budget = 0;
  MiningResult result;

  Search(const Task& t, const MiningModels& m, const MiningConfig& c, const AnswerEquivalence& e)
      : task(t), models(m), cfg(c), equivalent(e) {
    if (!models.draft || !models.source) throw InvalidInput("mining: draft model and continuation source required");
    if (task.prompt.empty() || task.prompt.prompt_len != task.prompt.size())
      throw InvalidInput("mining: task prompt must be a non-empty prompt-only sequence");
    budget = cfg.max_response_len ? cfg.max_response_len : task.max_response_len;
    if (budget < 1) throw InvalidInput("mining: T_max must be >= 1");
  }

  const Vocab& vocab() const { return models.draft->vocab(); }

  /// Generates the reference response; false when the task must be skipped.
  bool start() {
    result.reference = models.source->extend(task.prompt, budget, cfg.mode);
    result.answer = extract_answer(vocab(), result.reference.response());
    result.final_sequence = result.reference;
    if (!result.answer.has_value()) {
      result.status = MiningStatus::kSkipped;
      result.diagnostic = "task " + task.id + ": reference response has no extractable answer";
      return false;
    }
    return true;
  }

  /// Replaces response token t of `seq` with `draft_token` and lets the
  /// target continue within the remaining budget.
  TokenSequence replace(const TokenSequence& seq, std::size_t t, TokenId draft_token) const {
    TokenSequence cand = seq.prefix(seq.prompt_len + t).appended(draft_token);
    if (draft_token != vocab().eos() && t + 1 < budget) cand = models.source->extend(cand, budget - (t + 1), cfg.mode);
    return cand;
  }

  MismatchRecord label(const TokenSequence& seq, std::size_t t, TokenId draft_token, const TokenSequence& cand) {
    MismatchRecord rec;
    rec.task_id = task.id;
    rec.position = t;
    rec.target_token = seq.tokens[seq.prompt_len + t];
    rec.draft_token = draft_token;
    rec.prompt_len = seq.prompt_len;
    rec.context.assign(seq.tokens.begin(), seq.tokens.begin() + static_cast<std::ptrdiff_t>(seq.prompt_len + t));
    rec.important = !equivalent(extract_answer(vocab(), cand.response()), result.answer);

    TokenSequence prev{rec.context, rec.prompt_len};
    const TokenSequence with_draft = prev.appended(draft_token);
    rec.prev_draft_hidden = forward_step(*models.draft, prev).hidden;
    rec.draft_hidden = forward_step(*models.draft, with_draft).hidden;
    if (models.feature_target) {
      rec.prev_target_hidden = forward_step(*models.feature_target, prev).hidden;
      rec.target_hidden = forward_step(*models.feature_target, with_draft).hidden;
    }
    return rec;
  }

  std::size_t cap() const { return cfg.max_rollbacks ? cfg.max_rollbacks : 4 * budget; }

  bool over_cap() {
    if (result.iterations < cap()) return false;
    result.status = MiningStatus::kTruncated;
    result.diagnostic = "task " + task.id + ": search stopped after " + std::to_string(result.iterations) +
                        " iterations (cap reached), records are partial";
    return true;
  }
};

}  // namespace

bool MismatchRecord::operator==(const MismatchRecord& o) const {
  return task_id == o.task_id && position == o.position && target_token == o.target_token &&
         draft_token == o.draft_token && important == o.important && prompt_len == o.prompt_len &&
         context == o.context && draft_hidden == o.draft_hidden && target_hidden == o.target_hidden &&
         prev_draft_hidden == o.prev_draft_hidden && prev_target_hidden == o.prev_target_hidden;
}

std::size_t MiningResult::important_count() const {
  std::size_t n = 0;
  for (const auto& r : records) n += r.important ? 1 : 0;
  return n;
}

LocalContinuation::LocalContinuation(ModelHandle target) : target_(std::move(target)) {
  if (!target_) throw InvalidInput("LocalContinuation: target model required");
}

TokenSequence LocalContinuation::extend(const TokenSequence& context, std::size_t max_new,
                                        const DecodeMode& mode) const {
  return generate(*target_, context, max_new, mode);
}

RemoteContinuation::RemoteContinuation(RemoteEndpoint endpoint, VocabPtr vocab)
    : endpoint_(std::move(endpoint)), vocab_(std::move(vocab)) {
  if (!vocab_) throw InvalidInput("RemoteContinuation: vocabulary required");
}

TokenSequence RemoteContinuation::extend(const TokenSequence& context, std::size_t max_new,
                                         const DecodeMode& mode) const {
  return remote_continue(endpoint_, *vocab_, context, max_new, mode.temperature);
}

MiningModels MiningModels::Local(ModelHandle draft, ModelHandle target) {
  return {std::move(draft), std::make_shared<LocalContinuation>(target), target};
}

std::vector<std::size_t> mismatch_indices(const LanguageModel& draft, const TokenSequence& seq,
                                          const DecodeMode& mode) {
  std::vector<std::size_t> out;
  for (const auto& m : find_mismatches(draft, seq, mode)) out.push_back(m.index);
  return out;
}

MiningResult mine_important(const Task& task, const MiningModels& models, const MiningConfig& cfg,
                            const AnswerEquivalence& equivalent) {
  Search s(task, models, cfg, equivalent);
  if (!s.start()) return std::move(s.result);

  TokenSequence y = s.result.reference;
  std::vector<Mismatch> pending = find_mismatches(*models.draft, y, cfg.mode);
  std::size_t next = 0;
  while (next < pending.size()) {
    if (s.over_cap()) break;
    ++s.result.iterations;
    const auto [t, draft_token] = pending[next];
    TokenSequence cand = s.replace(y, t, draft_token);
    MismatchRecord rec = s.label(y, t, draft_token, cand);
    const bool important = rec.important;
    s.result.records.push_back(std::move(rec));
    s.result.trials.push_back(cand);
    if (important) {
      ++next;
      continue;
    }
    y = std::move(cand);
    // Positions before t keep their prefix, so only later mismatches are new;
    // t itself now holds the draft's own choice.
    pending = find_mismatches(*models.draft, y, cfg.mode);
    std::erase_if(pending, [t = t](const Mismatch& m) {
      if (m.index == t) throw std::logic_error("mine_important: adopted draft token is still a mismatch");
      return m.index < t;
    });
    next = 0;
  }
  s.result.final_sequence = std::move(y);
  return std::move(s.result);
}

MiningResult mine_important(const Task& task, ModelHandle draft, ModelHandle target, const MiningConfig& cfg) {
  return mine_important(task, MiningModels::Local(std::move(draft), std::move(target)), cfg);
}

MiningResult mine_naive(const Task& task, const MiningModels& models, const MiningConfig& cfg,
                        const AnswerEquivalence& equivalent) {
  Search s(task, models, cfg, equivalent);
  if (!s.start()) return std::move(s.result);
  const TokenSequence& y = s.result.reference;
  for (const auto& [t, draft_token] : find_mismatches(*models.draft, y, cfg.mode)) {
    if (s.over_cap()) break;
    ++s.result.iterations;
    TokenSequence cand = s.replace(y, t, draft_token);
    s.result.records.push_back(s.label(y, t, draft_token, cand));
    s.result.trials.push_back(std::move(cand));
  }
  return std::move(s.result);
}

MiningResult mine_naive(const Task& task, ModelHandle draft, ModelHandle target, const MiningConfig& cfg) {
  return mine_naive(task, MiningModels::Local(std::move(draft), std::move(target)), cfg);
}

std::vector<MiningResult> mine_tasks(const std::vector<Task>& tasks, const MiningModels& models,
                                     const MiningConfig& cfg, Miner miner, unsigned jobs) {
  std::vector<MiningResult> results(tasks.size());
  parallel_for(tasks.size(), jobs, [&](std::size_t i) {
    results[i] = miner == Miner::kImportant ? mine_important(tasks[i], models, cfg) : mine_naive(tasks[i], models, cfg);
  });
  return results;
}

std::vector<MismatchRecord> collect_records(const std::vector<MiningResult>& results) {
  std::vector<MismatchRecord> out;
  for (const auto& r : results) {
    if (r.status == MiningStatus::kSkipped) continue;
    out.insert(out.end(), r.records.begin(), r.records.end());
  }
  return out;
}

namespace {

constexpr const char* kHiddenFields[] = {"draft_hidden", "target_hidden", "prev_draft_hidden", "prev_target_hidden"};

const Vector& hidden_field(const MismatchRecord& r, int k) {
  switch (k) {
    case 0: return r.draft_hidden;
    case 1: return r.target_hidden;
    case 2: return r.prev_draft_hidden;
    default: return r.prev_target_hidden;
  }
}

Vector& hidden_field(MismatchRecord& r, int k) {
  return const_cast<Vector&>(hidden_field(static_cast<const MismatchRecord&>(r), k));
}

void check_dims(const std::vector<MismatchRecord>& records) {
  if (records.empty()) return;
  for (int k = 0; k < 4; ++k) {
    const auto d = hidden_field(records.front(), k).size();
    for (std::size_t i = 1; i < records.size(); ++i)
      if (hidden_field(records[i], k).size() != d)
        throw DataError(std::string("dataset: ") + kHiddenFields[k] + " has length " +
                        std::to_string(hidden_field(records[i], k).size()) + " in record " + std::to_string(i) +
                        ", expected " + std::to_string(d));
  }
}

}  // namespace

void write_dataset(const std::vector<MismatchRecord>& records, std::ostream& out) {
  check_dims(records);
  for (const auto& r : records) {
    nlohmann::json line;
    line["task_id"] = r.task_id;
    line["position"] = r.position;
    line["target_token"] = r.target_token;
    line["draft_token"] = r.draft_token;
    line["important"] = r.important;
    line["prompt_len"] = r.prompt_len;
    line["context"] = r.context;
    for (int k = 0; k < 4; ++k) {
      const Vector& h = hidden_field(r, k);
      line[kHiddenFields[k]] = std::vector<double>(h.data(), h.data() + h.size());
    }
    out << line.dump() << '\n';
  }
}

std::vector<MismatchRecord> read_dataset(std::istream& in) {
  std::vector<MismatchRecord> records;
  std::string text;
  std::size_t lineno = 0;
  while (std::getline(in, text)) {
    ++lineno;
    if (text.empty()) continue;
    try {
      const auto line = nlohmann::json::parse(text);
      MismatchRecord r;
      r.task_id = line.at("task_id").get<std::string>();
      r.position = line.at("position").get<std::size_t>();
      r.target_token = line.at("target_token").get<TokenId>();
      r.draft_token = line.at("draft_token").get<TokenId>();
      r.important = line.at("important").get<bool>();
      r.prompt_len = line.at("prompt_len").get<std::size_t>();
      r.context = line.at("context").get<std::vector<TokenId>>();
      for (int k = 0; k < 4; ++k) {
        const auto v = line.at(kHiddenFields[k]).get<std::vector<double>>();
        hidden_field(r, k) = Eigen::Map<const Vector>(v.data(), static_cast<Eigen::Index>(v.size()));
      }
      if (r.target_token == r.draft_token) throw DataError("target and draft tokens coincide");
      if (r.context.size() != r.prompt_len + r.position) throw DataError("context length disagrees with position");
      records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("dataset line " + std::to_string(lineno) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("dataset line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  check_dims(records);
  return records;
}

void export_dataset(const std::vector<MismatchRecord>& records, const std::string& path) {
  check_dims(records);
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  write_dataset(records, out);
}

std::vector<MismatchRecord> import_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path);
  return read_dataset(in);
}

}  // namespace specjudge

// Copyright 2026 The specjudge Authors
// SPDX-License-Identifier: Apache-2.0

#include "specjudge/trace.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include <json.hpp>

#include "specjudge/math.hpp"
#include "specjudge/sampling.hpp"

namespace specjudge {
namespace {

using nlohmann::json;

std::uint64_t prefix_seed() { return context_hash(RandomState{0x7ace}, {}); }

json side_to_json(const TraceSide& s, json& top) {
  top = json::array();
  for (const auto& e : s.top) top.push_back(json::array({e.id, e.logit}));
  return json(std::vector<double>(s.hidden.data(), s.hidden.data() + s.hidden.size()));
}

TraceSide side_from_json(const json& top, const json& tail, const json& hidden) {
  TraceSide s;
  for (const auto& e : top) {
    if (!e.is_array() || e.size() != 2) throw DataError("trace: top entries must be [id, logit] pairs");
    s.top.push_back({e[0].get<TokenId>(), e[1].get<double>()});
  }
  s.tail_mass = tail.get<double>();
  const auto h = hidden.get<std::vector<double>>();
  s.hidden = Eigen::Map<const Vector>(h.data(), static_cast<Eigen::Index>(h.size()));
  return s;
}

}  // namespace

TraceSide compress_row(const Vector& logits, const Vector& hidden, std::size_t top_m) {
  if (top_m < 1) throw InvalidInput("trace: top_m must be >= 1");
  const auto n = static_cast<std::size_t>(logits.size());
  top_m = std::min(top_m, n);
  std::vector<Eigen::Index> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](Eigen::Index a, Eigen::Index b) { return logits(a) > logits(b); });
  const Vector p = softmax(logits, 1.0);
  TraceSide side;
  side.hidden = hidden;
  for (std::size_t i = 0; i < n; ++i) {
    if (i < top_m) side.top.push_back({static_cast<TokenId>(order[i]), logits(order[i])});
    else side.tail_mass += p(order[i]);
  }
  return side;
}

Vector expand_logits(const TraceSide& side, std::size_t vocab_size) {
  const std::size_t m = side.top.size();
  if (m == 0 || m > vocab_size) throw DataError("trace: invalid top list size");
  Vector retained(static_cast<Eigen::Index>(m));
  for (std::size_t i = 0; i < m; ++i) retained(static_cast<Eigen::Index>(i)) = side.top[i].logit;
  const double lowest = retained.minCoeff();

  double tail_logit = lowest - 1000.0;
  if (m < vocab_size && side.tail_mass > 0.0 && side.tail_mass < 1.0) {
    const double full_lse = logsumexp(retained) - std::log1p(-side.tail_mass);
    tail_logit = std::log(side.tail_mass / static_cast<double>(vocab_size - m)) + full_lse;
  }
  tail_logit = std::min(tail_logit, std::nextafter(lowest, -std::numeric_limits<double>::infinity()));

  Vector logits = Vector::Constant(static_cast<Eigen::Index>(vocab_size), tail_logit);
  for (const auto& e : side.top) {
    if (e.id < 0 || static_cast<std::size_t>(e.id) >= vocab_size) throw DataError("trace: token id out of range");
    logits(e.id) = e.logit;
  }
  return logits;
}

Trace record_trace(const LanguageModel& draft, const LanguageModel& target, const TokenSequence& seq,
                   std::size_t top_m, std::size_t seq_index) {
  if (top_m < 1) throw InvalidInput("trace: top_m must be >= 1");
  const LmOutput d = forward_parallel(draft, seq);
  const LmOutput t = forward_parallel(target, seq);
  Trace trace;
  trace.records.reserve(seq.size());
  for (std::size_t pos = 0; pos < seq.size(); ++pos) {
    const auto c = static_cast<Eigen::Index>(pos);
    trace.records.push_back({seq_index, pos, seq.tokens[pos], pos < seq.prompt_len,
                             compress_row(d.logits.col(c), d.hidden.col(c), top_m),
                             compress_row(t.logits.col(c), t.hidden.col(c), top_m)});
  }
  return trace;
}

void merge_trace(Trace& into, const Trace& more) {
  std::size_t offset = 0;
  for (const auto& r : into.records) offset = std::max(offset, r.seq + 1);
  for (auto r : more.records) {
    r.seq += offset;
    into.records.push_back(std::move(r));
  }
}

void write_trace(const Trace& trace, std::ostream& out) {
  for (const auto& r : trace.records) {
    json line;
    line["seq"] = r.seq;
    line["pos"] = r.pos;
    line["token"] = r.token;
    line["prompt"] = r.prompt;
    json top;
    line["draft_hidden"] = side_to_json(r.draft, top);
    line["draft_top"] = top;
    line["draft_tail_mass"] = r.draft.tail_mass;
    line["target_hidden"] = side_to_json(r.target, top);
    line["target_top"] = top;
    line["target_tail_mass"] = r.target.tail_mass;
    out << line.dump() << '\n';
  }
}

Trace read_trace(std::istream& in) {
  Trace trace;
  std::string text;
  std::size_t lineno = 0;
  while (std::getline(in, text)) {
    ++lineno;
    if (text.empty()) continue;
    try {
      const json line = json::parse(text);
      TraceRecord r;
      r.seq = line.value("seq", std::size_t{0});
      r.pos = line.at("pos").get<std::size_t>();
      r.token = line.at("token").get<TokenId>();
      r.prompt = line.value("prompt", false);
      r.draft = side_from_json(line.at("draft_top"), line.at("draft_tail_mass"), line.at("draft_hidden"));
      r.target = side_from_json(line.at("target_top"), line.at("target_tail_mass"), line.at("target_hidden"));
      trace.records.push_back(std::move(r));
    } catch (const json::exception& e) {
      throw DataError("trace line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return trace;
}

void save_trace(const Trace& trace, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  write_trace(trace, out);
}

Trace load_trace(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path);
  return read_trace(in);
}

TraceModel::TraceModel(const Trace& trace, VocabPtr vocab, TraceSideKind side, std::string name)
    : vocab_(std::move(vocab)), name_(std::move(name)) {
  if (!vocab_) throw InvalidInput("trace: vocabulary required");
  if (name_.empty()) name_ = side == TraceSideKind::kDraft ? "trace-draft" : "trace-target";

  std::unordered_map<std::size_t, std::size_t> slot;
  for (const auto& r : trace.records) {
    auto [it, inserted] = slot.emplace(r.seq, sequences_.size());
    if (inserted) sequences_.emplace_back();
    Recorded& rec = sequences_[it->second];
    if (r.pos != rec.tokens.size()) throw DataError("trace: positions of sequence " + std::to_string(r.seq) + " are not contiguous");
    if (!vocab_->contains(r.token)) throw DataError("trace: token outside vocabulary");
    const TraceSide& s = side == TraceSideKind::kDraft ? r.draft : r.target;
    if (hidden_dim_ == 0) hidden_dim_ = s.hidden.size();
    if (s.hidden.size() != hidden_dim_) throw DataError("trace: hidden dimension changes between records");
    for (std::size_t i = 1; i < s.top.size(); ++i) {
      if (s.top[i].logit > s.top[i - 1].logit) throw DataError("trace: top entries not sorted descending");
    }
    rec.tokens.push_back(r.token);
    rec.rows.push_back(s);
  }
  const std::uint64_t seed = prefix_seed();
  for (std::size_t i = 0; i < sequences_.size(); ++i) {
    std::uint64_t h = seed;
    for (TokenId t : sequences_[i].tokens) {
      h = context_hash_extend(h, t);
      prefixes_.emplace(h, i);
    }
  }
}

const TraceModel::Recorded& TraceModel::locate(const TokenSequence& seq) const {
  std::uint64_t h = prefix_seed();
  for (TokenId t : seq.tokens) h = context_hash_extend(h, t);
  auto [lo, hi] = prefixes_.equal_range(h);
  for (auto it = lo; it != hi; ++it) {
    const Recorded& rec = sequences_[it->second];
    if (rec.tokens.size() >= seq.size() && std::equal(seq.tokens.begin(), seq.tokens.end(), rec.tokens.begin()))
      return rec;
  }
  throw DataError("trace: context of length " + std::to_string(seq.size()) + " was not recorded");
}

LmOutput TraceModel::forward(const TokenSequence& seq) const {
  const Recorded& rec = locate(seq);
  const auto n = static_cast<Eigen::Index>(seq.size());
  LmOutput out{Matrix(static_cast<Eigen::Index>(vocab_->size()), n), Matrix(hidden_dim_, n)};
  for (Eigen::Index pos = 0; pos < n; ++pos) {
    const TraceSide& s = rec.rows[static_cast<std::size_t>(pos)];
    out.logits.col(pos) = expand_logits(s, vocab_->size());
    out.hidden.col(pos) = s.hidden;
  }
  return out;
}

StepOutput TraceModel::step(const TokenSequence& seq) const {
  const TraceSide& s = locate(seq).rows[seq.size() - 1];
  return {expand_logits(s, vocab_->size()), s.hidden};
}

}  // namespace specjudge

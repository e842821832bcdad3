// Copyright 2026 The specjudge Authors
// SPDX-License-Identifier: Apache-2.0

#include "specjudge/tasks.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "specjudge/sampling.hpp"

namespace specjudge {
namespace {

std::vector<std::string_view> split_words(std::string_view text) {
  std::vector<std::string_view> words;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) words.push_back(text.substr(i, j - i));
    i = j;
  }
  return words;
}

std::optional<std::int64_t> parse_integer(std::string_view word) {
  std::int64_t v = 0;
  const char* first = word.data();
  const char* last = word.data() + word.size();
  auto [ptr, ec] = std::from_chars(first, last, v);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return v;
}

const char* op_instruction(ArithOp op) {
  switch (op) {
    case ArithOp::kAdd: return "Add";
    case ArithOp::kSubtract: return "Subtract";
    case ArithOp::kMultiply: return "Multiply by";
  }
  return "";
}

const char* op_word(ArithOp op) {
  switch (op) {
    case ArithOp::kAdd: return "plus";
    case ArithOp::kSubtract: return "minus";
    case ArithOp::kMultiply: return "times";
  }
  return "";
}

std::optional<std::int64_t> apply(std::int64_t v, ArithStep s) {
  std::int64_t r = 0;
  switch (s.op) {
    case ArithOp::kAdd: r = v + s.operand; break;
    case ArithOp::kSubtract: r = v - s.operand; break;
    case ArithOp::kMultiply: r = v * s.operand; break;
  }
  if (r < 0 || r > kMaxValue) return std::nullopt;
  return r;
}

std::string sentence_for_step(const std::string& filler, std::int64_t v, ArithStep s, std::int64_t r) {
  std::ostringstream os;
  os << filler << " we get " << v << ' ' << op_word(s.op) << ' ' << s.operand << " is " << r << " .";
  return os.str();
}

TokenSequence make_example(const Vocab& vocab, const std::string& prompt, const std::string& response) {
  TokenSequence seq;
  seq.tokens = vocab.encode(prompt);
  seq.prompt_len = seq.tokens.size();
  for (TokenId t : vocab.encode(response)) seq.tokens.push_back(t);
  return seq;
}

std::size_t pick_weighted(SplitMixRng& rng, const std::vector<double>& weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  double x = rng.uniform() * total;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (x < weights[i]) return i;
    x -= weights[i];
  }
  return weights.size() - 1;
}

}  // namespace

std::string Answer::to_string() const { return number ? std::to_string(*number) : "none"; }

Answer extract_answer(std::string_view text) {
  const auto words = split_words(text);
  for (std::size_t i = words.size(); i-- > 0;) {
    if (i + 2 < words.size() && words[i] == "final" && words[i + 1] == "answer" && words[i + 2] == "is") {
      if (i + 3 >= words.size()) return Answer::None();
      auto v = parse_integer(words[i + 3]);
      return v ? Answer::Number(*v) : Answer::None();
    }
  }
  return Answer::None();
}

Answer extract_answer(const Vocab& vocab, std::span<const TokenId> response) {
  return extract_answer(vocab.decode(response));
}

bool answers_equivalent(const Answer& a, const Answer& b) {
  return a.number.has_value() && b.number.has_value() && *a.number == *b.number;
}

std::int64_t ArithmeticProblem::evaluate() const {
  std::int64_t v = start;
  for (const auto& s : steps) {
    switch (s.op) {
      case ArithOp::kAdd: v += s.operand; break;
      case ArithOp::kSubtract: v -= s.operand; break;
      case ArithOp::kMultiply: v *= s.operand; break;
    }
  }
  return v;
}

VocabPtr arithmetic_vocab() {
  static const VocabPtr vocab = [] {
    std::vector<std::string> tokens;
    for (int i = 0; i <= kMaxValue; ++i) tokens.push_back(std::to_string(i));
    for (const char* w : {"Start", "with", "Add", "Subtract", "Multiply", "by", ".", "What", "is", "the",
                          "result", "?", "we", "have", "get", "plus", "minus", "times", "now", "then", "next",
                          "final", "answer", "<eos>"})
      tokens.emplace_back(w);
    return std::make_shared<const Vocab>(std::move(tokens), "<eos>");
  }();
  return vocab;
}

const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> words{"now", "then", "next"};
  return words;
}

ArithmeticProblem gen_arithmetic_problem(std::uint64_t seed, int num_steps) {
  if (num_steps < kMinSteps || num_steps > kMaxSteps)
    throw InvalidInput("gen_arithmetic_task: num_steps must lie in [" + std::to_string(kMinSteps) + ", " +
                       std::to_string(kMaxSteps) + "]");
  SplitMixRng rng(seed);
  ArithmeticProblem p;
  p.start = static_cast<int>(rng.uniform_int(1, 9));
  std::int64_t v = p.start;
  while (static_cast<int>(p.steps.size()) < num_steps) {
    const ArithStep s{static_cast<ArithOp>(rng.uniform_int(0, 2)), static_cast<int>(rng.uniform_int(1, 9))};
    if (auto r = apply(v, s)) {
      p.steps.push_back(s);
      v = *r;
    }
  }
  return p;
}

std::string render_prompt(const ArithmeticProblem& problem) {
  std::ostringstream os;
  os << "Start with " << problem.start << " .";
  for (const auto& s : problem.steps) os << ' ' << op_instruction(s.op) << ' ' << s.operand << " .";
  os << " What is the result ?";
  return os.str();
}

std::string render_solution(const ArithmeticProblem& problem, const std::vector<std::string>& fillers) {
  if (fillers.size() < problem.steps.size()) throw InvalidInput("render_solution: one filler per step required");
  std::ostringstream os;
  std::int64_t v = problem.start;
  os << "we have " << v << " .";
  for (std::size_t i = 0; i < problem.steps.size(); ++i) {
    auto r = apply(v, problem.steps[i]);
    if (!r) throw InvalidInput("render_solution: value leaves the supported range");
    os << ' ' << sentence_for_step(fillers[i], v, problem.steps[i], *r);
    v = *r;
  }
  os << " final answer is " << v << " . <eos>";
  return os.str();
}

std::size_t default_max_response_len(std::size_t num_steps) { return 9 * num_steps + 24; }

Task make_arithmetic_task(const ArithmeticProblem& problem, const Vocab& vocab, std::string id,
                          std::uint64_t seed) {
  Task task;
  task.id = std::move(id);
  task.prompt.tokens = vocab.encode(render_prompt(problem));
  task.prompt.prompt_len = task.prompt.tokens.size();
  task.oracle = Answer::Number(problem.evaluate());
  task.max_response_len = default_max_response_len(problem.steps.size());
  task.seed = seed;
  return task;
}

Task gen_arithmetic_task(std::uint64_t seed, int num_steps, const Vocab& vocab) {
  return make_arithmetic_task(gen_arithmetic_problem(seed, num_steps), vocab, "arith-" + std::to_string(seed), seed);
}

std::vector<Task> gen_arithmetic_tasks(std::uint64_t seed, std::size_t count, const Vocab& vocab, int min_steps,
                                       int max_steps) {
  if (min_steps > max_steps) throw InvalidInput("gen_arithmetic_tasks: min_steps > max_steps");
  std::vector<Task> tasks;
  tasks.reserve(count);
  SplitMixRng rng(seed);
  for (std::size_t i = 0; i < count; ++i) {
    const std::uint64_t task_seed = rng.next();
    const int steps = static_cast<int>(rng.uniform_int(min_steps, max_steps));
    tasks.push_back(make_arithmetic_task(gen_arithmetic_problem(task_seed, steps), vocab,
                                         "arith-" + std::to_string(seed) + "-" + std::to_string(i), task_seed));
  }
  return tasks;
}

void write_tasks(const std::vector<Task>& tasks, const Vocab& vocab, std::ostream& out) {
  for (const auto& t : tasks) {
    nlohmann::json line;
    line["task_id"] = t.id;
    line["prompt"] = vocab.decode(t.prompt.tokens);
    line["oracle"] = t.oracle.number ? nlohmann::json(*t.oracle.number) : nlohmann::json(nullptr);
    line["seed"] = t.seed;
    line["max_response_len"] = t.max_response_len;
    out << line.dump() << '\n';
  }
}

std::vector<Task> read_tasks(std::istream& in, const Vocab& vocab) {
  std::vector<Task> tasks;
  std::string text;
  std::size_t lineno = 0;
  while (std::getline(in, text)) {
    ++lineno;
    if (text.empty()) continue;
    try {
      const auto line = nlohmann::json::parse(text);
      Task t;
      t.id = line.at("task_id").get<std::string>();
      t.prompt.tokens = vocab.encode(line.at("prompt").get<std::string>());
      t.prompt.prompt_len = t.prompt.tokens.size();
      if (!line.at("oracle").is_null()) t.oracle = Answer::Number(line.at("oracle").get<std::int64_t>());
      t.seed = line.value("seed", std::uint64_t{0});
      t.max_response_len = line.value("max_response_len", std::size_t{128});
      if (t.max_response_len < 1) throw DataError("max_response_len must be >= 1");
      tasks.push_back(std::move(t));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("task line " + std::to_string(lineno) + ": " + e.what());
    } catch (const InvalidInput& e) {
      throw DataError("task line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return tasks;
}

void save_tasks(const std::vector<Task>& tasks, const Vocab& vocab, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  write_tasks(tasks, vocab, out);
}

std::vector<Task> load_tasks(const std::string& path, const Vocab& vocab) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path);
  return read_tasks(in, vocab);
}

std::vector<TokenSequence> build_arithmetic_corpus(const Vocab& vocab, const CorpusOptions& options) {
  const auto& fillers = filler_words();
  if (options.filler_copies.size() != fillers.size() || options.filler_weights.size() != fillers.size())
    throw InvalidInput("corpus: one copy count and one weight per filler word required");
  std::vector<TokenSequence> corpus;

  if (options.fact_table) {
    for (int v = 0; v <= kMaxValue; ++v) {
      for (int op = 0; op < 3; ++op) {
        for (int k = 1; k <= 9; ++k) {
          const ArithStep s{static_cast<ArithOp>(op), k};
          const auto r = apply(v, s);
          if (!r) continue;
          ArithmeticProblem p{v, {s}};
          const std::string prompt = render_prompt(p);
          auto add = [&](const std::string& filler, std::int64_t result, int copies) {
            std::ostringstream os;
            os << "we have " << v << " . " << sentence_for_step(filler, v, s, result) << " final answer is "
               << result << " . <eos>";
            TokenSequence ex = make_example(vocab, prompt, os.str());
            for (int c = 0; c < copies; ++c) corpus.push_back(ex);
          };
          for (std::size_t f = 0; f < fillers.size(); ++f) add(fillers[f], *r, options.filler_copies[f]);
          if (*r + 1 <= kMaxValue) add(fillers[0], *r + 1, options.off_by_one_copies);
          if (*r - 1 >= 0) add(fillers[0], *r - 1, options.off_by_one_copies);
        }
      }
    }
  }

  SplitMixRng rng(options.seed);
  for (std::size_t i = 0; i < options.transcripts; ++i) {
    const std::uint64_t seed = rng.next();
    const int steps = static_cast<int>(rng.uniform_int(kMinSteps, kMaxSteps));
    const ArithmeticProblem p = gen_arithmetic_problem(seed, steps);
    std::vector<std::string> chosen;
    for (int s = 0; s < steps; ++s) chosen.push_back(fillers[pick_weighted(rng, options.filler_weights)]);
    corpus.push_back(make_example(vocab, render_prompt(p), render_solution(p, chosen)));
  }
  if (corpus.empty()) throw InvalidInput("corpus: options produce no examples");
  return corpus;
}

void write_corpus(const std::vector<TokenSequence>& corpus, const Vocab& vocab, std::ostream& out) {
  for (const auto& seq : corpus) {
    nlohmann::json line;
    line["prompt"] = vocab.decode(seq.prompt());
    line["response"] = vocab.decode(seq.response());
    out << line.dump() << '\n';
  }
}

std::vector<TokenSequence> read_corpus(std::istream& in, const Vocab& vocab) {
  std::vector<TokenSequence> corpus;
  std::string text;
  std::size_t lineno = 0;
  while (std::getline(in, text)) {
    ++lineno;
    if (text.empty()) continue;
    try {
      const auto line = nlohmann::json::parse(text);
      corpus.push_back(make_example(vocab, line.at("prompt").get<std::string>(), line.at("response").get<std::string>()));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("corpus line " + std::to_string(lineno) + ": " + e.what());
    } catch (const InvalidInput& e) {
      throw DataError("corpus line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return corpus;
}

}  // namespace specjudge

// Copyright 2026 The specjudge Authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: task and corpus generation, mining, judge
// training, decoding, benchmarking and trace recording.

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "specjudge/bench.hpp"
#include "specjudge/engine.hpp"
#include "specjudge/judge.hpp"
#include "specjudge/mining.hpp"
#include "specjudge/model_spec.hpp"
#include "specjudge/presets.hpp"
#include "specjudge/tasks.hpp"
#include "specjudge/trace.hpp"

namespace {

using namespace specjudge;
using json = nlohmann::ordered_json;

constexpr const char* kVersion = "0.1.0";

enum Exit { kOk = 0, kUsage = 1, kData = 2, kRemote = 3 };

struct Options {
  std::uint64_t seed = 0;
  std::string out;
  unsigned jobs = 1;
  double temperature = 0.0;
  std::size_t max_tokens = 0;
  std::string draft_model = "arith-draft";
  std::string target_model = "arith";
  std::string tasks;

  // gen-tasks / gen-corpus
  std::size_t count = 100;
  int min_steps = kMinSteps;
  int max_steps = kMaxSteps;
  std::size_t transcripts = 2000;
  bool no_fact_table = false;

  // mine
  std::string miner = "important";
  std::size_t max_rollbacks = 0;
  std::string remote_url;
  std::string remote_model;
  std::string remote_token;
  int remote_retries = 3;
  int remote_timeout_ms = 30000;
  bool no_target_features = false;

  // train-judge
  std::string data;
  std::string features = "draft_token/both";
  double recall = 0.90;
  std::size_t min_important = 10;
  double positive_weight = 1.0;

  // decode / bench
  std::size_t window = 64;
  std::vector<std::string> policy;
  std::vector<int> topk;
  std::string judge;
  std::vector<double> threshold;
  std::string sampled_rule = "coupled";
  std::string format = "csv";

  // record-trace
  std::size_t top_m = 0;
  bool with_mining = false;
};

void write_manifest(const std::string& command, const Options& o, json options, json summary) {
  json doc;
  doc["command"] = command;
  doc["version"] = kVersion;
  doc["seed"] = o.seed;
  doc["output"] = o.out;
  doc["options"] = std::move(options);
  doc["summary"] = std::move(summary);
  const std::string path = o.out + ".manifest.json";
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  out << doc.dump(2) << '\n';
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path);
  return out;
}

DecodeMode mode_of(const Options& o) {
  if (o.temperature < 0.0) throw InvalidInput("--temperature must be >= 0");
  return o.temperature == 0.0 ? DecodeMode::Greedy() : DecodeMode::Sampled(RandomState{o.seed}, o.temperature);
}

struct Models {
  VocabPtr vocab;
  ModelHandle target;
  ModelHandle draft;
};

Models load_models(const Options& o) {
  Models m;
  m.vocab = arithmetic_vocab();
  m.target = build_model(ModelSpec::parse(o.target_model), ModelRole::kTarget, m.vocab);
  m.draft = build_model(ModelSpec::parse(o.draft_model), ModelRole::kDraft, m.vocab, m.target);
  return m;
}

json model_options(const Options& o) {
  return {{"draft_model", o.draft_model}, {"target_model", o.target_model}};
}

int cmd_gen_tasks(const Options& o) {
  const auto vocab = arithmetic_vocab();
  const auto tasks = gen_arithmetic_tasks(o.seed, o.count, *vocab, o.min_steps, o.max_steps);
  save_tasks(tasks, *vocab, o.out);
  write_manifest("gen-tasks", o, {{"count", o.count}, {"min_steps", o.min_steps}, {"max_steps", o.max_steps}},
                 {{"tasks", tasks.size()}});
  std::cout << "wrote " << tasks.size() << " tasks to " << o.out << '\n';
  return kOk;
}

int cmd_gen_corpus(const Options& o) {
  const auto vocab = arithmetic_vocab();
  CorpusOptions c;
  c.seed = o.seed;
  c.transcripts = o.transcripts;
  c.fact_table = !o.no_fact_table;
  const auto corpus = build_arithmetic_corpus(*vocab, c);
  auto out = open_out(o.out);
  write_corpus(corpus, *vocab, out);
  write_manifest("gen-corpus", o, {{"transcripts", o.transcripts}, {"fact_table", c.fact_table}},
                 {{"sequences", corpus.size()}});
  std::cout << "wrote " << corpus.size() << " sequences to " << o.out << '\n';
  return kOk;
}

MiningConfig mining_config(const Options& o) {
  MiningConfig cfg;
  cfg.mode = mode_of(o);
  cfg.max_response_len = o.max_tokens;
  cfg.max_rollbacks = o.max_rollbacks;
  return cfg;
}

Miner miner_of(const std::string& s) {
  if (s == "important") return Miner::kImportant;
  if (s == "naive") return Miner::kNaive;
  throw InvalidInput("--miner must be important or naive");
}

int cmd_mine(const Options& o) {
  const Models m = load_models(o);
  const auto tasks = load_tasks(o.tasks, *m.vocab);
  MiningModels mm = MiningModels::Local(m.draft, m.target);
  if (!o.remote_url.empty()) {
    RemoteEndpoint ep;
    ep.base_url = o.remote_url;
    ep.model = o.remote_model;
    ep.max_retries = o.remote_retries;
    ep.timeout = std::chrono::milliseconds(o.remote_timeout_ms);
    if (!o.remote_token.empty()) ep.bearer_token = o.remote_token;
    else if (const char* env = std::getenv("SPECJUDGE_API_KEY")) ep.bearer_token = env;
    mm.source = std::make_shared<RemoteContinuation>(ep, m.vocab);
    if (o.no_target_features) mm.feature_target = nullptr;
  }
  const auto results = mine_tasks(tasks, mm, mining_config(o), miner_of(o.miner), o.jobs);
  const auto records = collect_records(results);
  export_dataset(records, o.out);

  std::size_t skipped = 0, truncated = 0, important = 0;
  for (const auto& r : results) {
    if (r.status == MiningStatus::kSkipped) {
      ++skipped;
      std::cerr << "warning: " << r.diagnostic << '\n';
    } else if (r.status == MiningStatus::kTruncated) {
      ++truncated;
      std::cerr << "warning: " << r.diagnostic << '\n';
    }
  }
  for (const auto& r : records) important += r.important ? 1 : 0;
  const double fraction = records.empty() ? 0.0 : static_cast<double>(important) / static_cast<double>(records.size());
  json opts = model_options(o);
  opts["tasks"] = o.tasks;
  opts["miner"] = o.miner;
  opts["temperature"] = o.temperature;
  opts["max_tokens"] = o.max_tokens;
  opts["max_rollbacks"] = o.max_rollbacks;
  opts["remote_url"] = o.remote_url;
  opts["remote_model"] = o.remote_model;
  opts["target_features"] = mm.feature_target != nullptr;
  write_manifest("mine", o, opts,
                 {{"tasks", tasks.size()},
                  {"skipped", skipped},
                  {"truncated", truncated},
                  {"records", records.size()},
                  {"important", important},
                  {"important_fraction", fraction}});
  std::cout << "mined " << records.size() << " mismatches (" << important << " important, fraction "
            << format_double(fraction) << ") from " << tasks.size() << " tasks, " << skipped << " skipped\n";
  return kOk;
}

int cmd_train_judge(const Options& o) {
  const auto records = import_dataset(o.data);
  JudgeTrainOptions opt;
  opt.features = FeatureConfig::parse(o.features);
  opt.seed = o.seed;
  opt.calibration.target_recall = o.recall;
  opt.calibration.min_important = o.min_important;
  opt.logreg.positive_weight = o.positive_weight;
  const auto rep = train_judge(records, opt);
  save_judge(rep.judge, o.out);
  json aucs = json::array();
  for (const auto& [c, auc] : rep.search.auc_by_C) aucs.push_back({{"C", c}, {"auc", auc}});
  write_manifest("train-judge", o,
                 {{"data", o.data},
                  {"features", o.features},
                  {"recall", o.recall},
                  {"min_important", o.min_important},
                  {"positive_weight", o.positive_weight}},
                 {{"examples", rep.examples},
                  {"important", rep.important},
                  {"C", rep.judge.C},
                  {"validation_auc", rep.judge.validation_auc},
                  {"threshold", rep.judge.threshold},
                  {"grid", aucs}});
  std::cout << "judge: C=" << format_double(rep.judge.C) << " validation AUC "
            << format_double(rep.judge.validation_auc) << " threshold " << format_double(rep.judge.threshold)
            << '\n';
  return kOk;
}

EngineConfig engine_config(const Options& o) {
  EngineConfig cfg;
  cfg.window = o.window;
  cfg.max_tokens = o.max_tokens ? o.max_tokens : 256;
  cfg.mode = mode_of(o);
  if (o.sampled_rule == "coupled") cfg.sampled_rule = SampledRule::kCoupled;
  else if (o.sampled_rule == "residual") cfg.sampled_rule = SampledRule::kResidual;
  else throw InvalidInput("--sampled-rule must be coupled or residual");
  cfg.validate();
  return cfg;
}

std::shared_ptr<const JudgeModel> load_judge_opt(const Options& o, const Models& m) {
  if (o.judge.empty()) throw InvalidInput("--judge is required for the judge policy");
  auto j = std::make_shared<const JudgeModel>(load_judge(o.judge));
  j->check_models(m.draft->hidden_dim(), m.target->hidden_dim());
  return j;
}

std::vector<PolicyConfig> policies_of(const Options& o, const Models& m) {
  std::vector<std::string> names = o.policy.empty() ? std::vector<std::string>{"lossless"} : o.policy;
  std::vector<PolicyConfig> out;
  for (const auto& name : names) {
    if (name == "lossless") {
      out.push_back(PolicyConfig::Lossless());
    } else if (name == "topk") {
      const std::vector<int> ks = o.topk.empty() ? std::vector<int>{1} : o.topk;
      for (int k : ks) out.push_back(PolicyConfig::TopK(k));
    } else if (name == "judge") {
      auto j = load_judge_opt(o, m);
      if (o.threshold.empty()) out.push_back(PolicyConfig::Judge(j));
      for (double t : o.threshold) out.push_back(PolicyConfig::Judge(j, t));
    } else {
      throw InvalidInput("--policy must be lossless, topk or judge");
    }
  }
  return out;
}

json engine_options(const Options& o) {
  json j = model_options(o);
  j["tasks"] = o.tasks;
  j["window"] = o.window;
  j["policy"] = o.policy;
  j["topk"] = o.topk;
  j["judge"] = o.judge;
  j["threshold"] = o.threshold;
  j["temperature"] = o.temperature;
  j["max_tokens"] = o.max_tokens ? o.max_tokens : 256;
  j["sampled_rule"] = o.sampled_rule;
  return j;
}

int cmd_decode(const Options& o) {
  const Models m = load_models(o);
  const auto tasks = load_tasks(o.tasks, *m.vocab);
  const auto policies = policies_of(o, m);
  if (policies.size() != 1) throw InvalidInput("decode takes exactly one policy setting");
  BenchOptions bo;
  bo.engine = engine_config(o);
  bo.jobs = o.jobs;
  const auto outcomes = decode_tasks(tasks, *m.draft, *m.target, policies.front(), bo);
  auto out = open_out(o.out);
  std::size_t correct = 0, failed = 0;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const auto& oc = outcomes[i];
    json line;
    line["task_id"] = tasks[i].id;
    if (!oc.error.empty()) {
      ++failed;
      line["error"] = oc.error;
    } else {
      line["response"] = m.vocab->decode(oc.output.response());
      line["answer"] = oc.answer.number ? json(*oc.answer.number) : json(nullptr);
      line["correct"] = oc.correct;
      line["cycles"] = oc.cycles.size();
      line["accepted_per_cycle"] = accepted_per_cycle(oc.cycles);
      correct += oc.correct ? 1 : 0;
    }
    out << line.dump() << '\n';
  }
  const BenchRow row = summarize(policies.front(), tasks, outcomes, bo.engine.mode.state.seed);
  write_manifest("decode", o, engine_options(o),
                 {{"tasks", tasks.size()},
                  {"correct", correct},
                  {"failed", failed},
                  {"accuracy", row.accuracy},
                  {"accepted_per_cycle", row.accepted_per_cycle}});
  std::cout << "decoded " << tasks.size() << " tasks: accuracy " << format_double(row.accuracy)
            << ", accepted per cycle " << format_double(row.accepted_per_cycle) << '\n';
  return failed ? kData : kOk;
}

int cmd_bench(const Options& o) {
  const Models m = load_models(o);
  const auto tasks = load_tasks(o.tasks, *m.vocab);
  BenchOptions bo;
  bo.engine = engine_config(o);
  bo.jobs = o.jobs;
  const auto rows = run_benchmark(tasks, *m.draft, *m.target, policies_of(o, m), bo);
  ReportFormat fmt = ReportFormat::kCsv;
  if (o.format == "json") fmt = ReportFormat::kJson;
  else if (o.format != "csv") throw InvalidInput("--format must be csv or json");
  emit_report(rows, o.out, fmt);
  json opts = engine_options(o);
  opts["format"] = o.format;
  std::size_t failed = 0;
  for (const auto& r : rows) failed += r.failed;
  write_manifest("bench", o, opts, {{"tasks", tasks.size()}, {"rows", rows.size()}, {"failed_decodes", failed}});
  write_report(rows, std::cout);
  return kOk;
}

int cmd_record_trace(const Options& o) {
  const Models m = load_models(o);
  const auto tasks = load_tasks(o.tasks, *m.vocab);
  const std::size_t top_m = o.top_m ? o.top_m : m.vocab->size();
  std::vector<TokenSequence> seqs;
  if (o.with_mining) {
    const auto results = mine_tasks(tasks, MiningModels::Local(m.draft, m.target), mining_config(o),
                                    miner_of(o.miner), o.jobs);
    for (const auto& r : results) {
      seqs.push_back(r.reference);
      seqs.insert(seqs.end(), r.trials.begin(), r.trials.end());
    }
  } else {
    const DecodeMode mode = mode_of(o);
    for (const auto& t : tasks)
      seqs.push_back(generate(*m.target, t.prompt, o.max_tokens ? o.max_tokens : t.max_response_len, mode));
  }
  Trace trace;
  for (std::size_t i = 0; i < seqs.size(); ++i) merge_trace(trace, record_trace(*m.draft, *m.target, seqs[i], top_m));
  save_trace(trace, o.out);
  json opts = model_options(o);
  opts["tasks"] = o.tasks;
  opts["top_m"] = top_m;
  opts["with_mining"] = o.with_mining;
  opts["miner"] = o.miner;
  opts["temperature"] = o.temperature;
  opts["max_tokens"] = o.max_tokens;
  write_manifest("record-trace", o, opts, {{"sequences", seqs.size()}, {"records", trace.records.size()}});
  std::cout << "recorded " << seqs.size() << " sequences (" << trace.records.size() << " positions) to " << o.out
            << '\n';
  return kOk;
}

void add_models(CLI::App* c, Options& o) {
  c->add_option("--draft-model", o.draft_model, "Draft model spec or file")->capture_default_str();
  c->add_option("--target-model", o.target_model, "Target model spec or file")->capture_default_str();
}

void add_sampling(CLI::App* c, Options& o) {
  c->add_option("--temperature", o.temperature, "Sampling temperature, 0 = greedy")->capture_default_str();
  c->add_option("--max-tokens", o.max_tokens, "Response token cap (0 = per-task default)");
}

void add_engine(CLI::App* c, Options& o) {
  c->add_option("--tasks", o.tasks, "Task file")->required();
  add_models(c, o);
  add_sampling(c, o);
  c->add_option("--window", o.window, "Speculation window W")->capture_default_str();
  c->add_option("--policy", o.policy, "lossless | topk | judge")->delimiter(',');
  c->add_option("--topk", o.topk, "K for the topk policy")->delimiter(',');
  c->add_option("--judge", o.judge, "Judge model file");
  c->add_option("--threshold", o.threshold, "Judge threshold override")->delimiter(',');
  c->add_option("--sampled-rule", o.sampled_rule, "coupled | residual")->capture_default_str();
}

}  // namespace

int main(int argc, char** argv) {
  Options o;
  CLI::App app{"Speculative decoding with a learned importance judge"};
  app.set_version_flag("--version", kVersion);
  app.require_subcommand(1);
  app.add_option("--seed", o.seed, "Random seed")->capture_default_str();
  app.add_option("--jobs", o.jobs, "Worker threads")->capture_default_str();

  auto* gen_tasks = app.add_subcommand("gen-tasks", "Generate arithmetic tasks");
  gen_tasks->add_option("--count", o.count)->capture_default_str();
  gen_tasks->add_option("--min-steps", o.min_steps)->capture_default_str();
  gen_tasks->add_option("--max-steps", o.max_steps)->capture_default_str();

  auto* gen_corpus = app.add_subcommand("gen-corpus", "Generate the arithmetic training corpus");
  gen_corpus->add_option("--transcripts", o.transcripts)->capture_default_str();
  gen_corpus->add_flag("--no-fact-table", o.no_fact_table);

  auto* mine = app.add_subcommand("mine", "Mine important tokens");
  mine->add_option("--tasks", o.tasks, "Task file")->required();
  add_models(mine, o);
  add_sampling(mine, o);
  mine->add_option("--miner", o.miner, "important | naive")->capture_default_str();
  mine->add_option("--max-rollbacks", o.max_rollbacks);
  mine->add_option("--remote-url", o.remote_url, "OpenAI-compatible server base URL");
  mine->add_option("--remote-model", o.remote_model);
  mine->add_option("--remote-token", o.remote_token, "Bearer token (default: $SPECJUDGE_API_KEY)");
  mine->add_option("--remote-retries", o.remote_retries)->capture_default_str();
  mine->add_option("--remote-timeout-ms", o.remote_timeout_ms)->capture_default_str();
  mine->add_flag("--no-target-features", o.no_target_features, "Do not compute target hidden states locally");

  auto* train = app.add_subcommand("train-judge", "Train and calibrate the importance judge");
  train->add_option("--data", o.data, "Mined dataset")->required();
  train->add_option("--features", o.features)->capture_default_str();
  train->add_option("--recall", o.recall, "Target recall for the threshold")->capture_default_str();
  train->add_option("--min-important", o.min_important)->capture_default_str();
  train->add_option("--positive-weight", o.positive_weight)->capture_default_str();

  auto* decode = app.add_subcommand("decode", "Speculative decoding over a task file");
  add_engine(decode, o);

  auto* bench = app.add_subcommand("bench", "Benchmark policies");
  add_engine(bench, o);
  bench->add_option("--format", o.format, "csv | json")->capture_default_str();

  auto* record = app.add_subcommand("record-trace", "Record draft/target outputs for replay");
  record->add_option("--tasks", o.tasks, "Task file")->required();
  add_models(record, o);
  add_sampling(record, o);
  record->add_option("--top-m", o.top_m, "Logits kept per position (0 = all)");
  record->add_flag("--with-mining", o.with_mining, "Also record every sequence the miner visits");
  record->add_option("--miner", o.miner)->capture_default_str();

  for (auto* sub : app.get_subcommands({})) {
    sub->add_option("--seed", o.seed, "Random seed")->capture_default_str();
    sub->add_option("--jobs", o.jobs, "Worker threads")->capture_default_str();
    sub->add_option("--out", o.out, "Output file")->required();
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*gen_tasks) return cmd_gen_tasks(o);
    if (*gen_corpus) return cmd_gen_corpus(o);
    if (*mine) return cmd_mine(o);
    if (*train) return cmd_train_judge(o);
    if (*decode) return cmd_decode(o);
    if (*bench) return cmd_bench(o);
    if (*record) return cmd_record_trace(o);
  } catch (const RemoteError& e) {
    std::cerr << "remote error (status " << e.status() << "): " << e.what() << '\n';
    return kRemote;
  } catch (const ProtocolError& e) {
    std::cerr << "remote protocol error: " << e.what() << '\n';
    return kRemote;
  } catch (const InvalidInput& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}

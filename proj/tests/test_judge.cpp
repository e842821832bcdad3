// Copyright 2026 The specjudge Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <sstream>

#include "specjudge/judge.hpp"
#include "specjudge/math.hpp"
#include "support/fixtures.hpp"

namespace specjudge {
namespace {

Vector vec(std::initializer_list<double> xs) {
  Vector v(static_cast<Eigen::Index>(xs.size()));
  Eigen::Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

MismatchRecord hand_record() {
  MismatchRecord r;
  r.task_id = "t";
  r.draft_hidden = vec({1, 2, 3});
  r.target_hidden = vec({4, 5});
  r.prev_draft_hidden = vec({6, 7, 8});
  r.prev_target_hidden = vec({9, 10});
  return r;
}

// Gaussian blobs with one group per row.
Dataset blobs(std::size_t n, double separation, std::uint64_t seed, Eigen::Index dims = 2) {
  SplitMixRng rng(seed);
  Dataset d;
  d.X.resize(static_cast<Eigen::Index>(n), dims);
  d.y.resize(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    d.y(r) = i % 2 == 0 ? 1.0 : 0.0;
    for (Eigen::Index c = 0; c < dims; ++c) d.X(r, c) = (d.y(r) == 1.0 ? separation : -separation) + 0.5 * rng.normal();
    d.groups.push_back("g" + std::to_string(i / 3));
  }
  return d;
}

const std::vector<MismatchRecord>& mined_records() {
  static const std::vector<MismatchRecord> recs = [] {
    const auto& m = testing::arith();
    return collect_records(mine_tasks(gen_arithmetic_tasks(7, 500, *m.vocab), MiningModels::Local(m.draft, m.target),
                                      MiningConfig{DecodeMode::Greedy()}, Miner::kImportant, 4));
  }();
  return recs;
}

TEST(Features, LayoutsFollowConfiguration) {
  const MismatchRecord r = hand_record();
  EXPECT_EQ(assemble_features(r, FeatureConfig::parse("draft_token/draft")), vec({1, 2, 3}));
  EXPECT_EQ(assemble_features(r, FeatureConfig::parse("draft_token/target")), vec({4, 5}));
  EXPECT_EQ(assemble_features(r, FeatureConfig::parse("draft_token/both")), vec({1, 2, 3, 4, 5}));
  EXPECT_EQ(assemble_features(r, FeatureConfig::parse("prev/both")), vec({6, 7, 8, 9, 10}));
  EXPECT_EQ(assemble_features(r, FeatureConfig::parse("prev/target")), vec({9, 10}));
  EXPECT_EQ(FeatureConfig::parse("prev/target").dim(3, 2), 2);
  EXPECT_EQ(FeatureConfig{}.to_string(), "draft_token/both");
  for (const char* s : {"prev/draft", "prev/target", "prev/both", "draft_token/draft"})
    EXPECT_EQ(FeatureConfig::parse(s).to_string(), s);
  for (const char* s : {"prev", "next/both", "prev/all"}) EXPECT_THROW(FeatureConfig::parse(s), InvalidInput);
  MismatchRecord missing = r;
  missing.target_hidden = Vector();
  EXPECT_THROW(assemble_features(missing, FeatureConfig{}), InvalidInput);
  EXPECT_NO_THROW(assemble_features(missing, FeatureConfig::parse("draft_token/draft")));
}

TEST(Features, PrevTargetVariantMatchesRecomputedState) {
  const auto& m = testing::arith();
  const auto& recs = mined_records();
  ASSERT_GT(recs.size(), 20u);
  for (std::size_t i = 0; i < 20; ++i) {
    const auto& r = recs[i];
    const TokenSequence ctx{r.context, r.prompt_len};
    EXPECT_EQ(assemble_features(r, FeatureConfig::parse("prev/target")), m.target->step(ctx).hidden);
    const Vector both = assemble_features(r, FeatureConfig{});
    EXPECT_EQ(both.head(m.draft->hidden_dim()), m.draft->step(ctx.appended(r.draft_token)).hidden);
  }
}

TEST(LogReg, ZeroIterationsGivesHalf) {
  const Dataset d = blobs(20, 1.0, 1);
  LogRegOptions opt;
  opt.max_iters = 0;
  const LogRegModel m = train_logreg(d.X, d.y, opt);
  EXPECT_TRUE((m.w.array() == 0.0).all());
  EXPECT_EQ(m.b, 0.0);
  EXPECT_TRUE((predict_proba(m, d.X).array() == 0.5).all());
}

TEST(LogReg, SeparableBlobsAreFitExactly) {
  const Dataset d = blobs(200, 3.0, 2);
  LogRegOptions opt;
  opt.C = 1e-6;
  const LogRegModel m = train_logreg(d.X, d.y, opt);
  const Vector p = predict_proba(m, d.X);
  int correct = 0;
  for (Eigen::Index i = 0; i < p.size(); ++i) correct += (p(i) >= 0.5) == (d.y(i) == 1.0);
  EXPECT_EQ(correct, 200);
}

TEST(LogReg, GradientMatchesCentralDifferences) {
  SplitMixRng rng(11);
  for (int inst = 0; inst < 20; ++inst) {
    const Eigen::Index n = 30, dims = 10;
    Matrix X(n, dims);
    Vector y(n), w(dims);
    for (Eigen::Index i = 0; i < n; ++i) {
      for (Eigen::Index c = 0; c < dims; ++c) X(i, c) = rng.normal();
      y(i) = rng.uniform() < 0.4 ? 1.0 : 0.0;
    }
    for (Eigen::Index c = 0; c < dims; ++c) w(c) = rng.normal();
    const double b = rng.normal();
    LogRegOptions opt;
    opt.C = std::pow(10.0, -static_cast<double>(inst % 8));
    opt.positive_weight = inst % 2 ? 1.0 : 3.0;
    Vector gw;
    double gb = 0;
    logreg_objective(X, y, w, b, opt, &gw, &gb);
    const double h = 1e-5;
    Vector fd(dims + 1), an(dims + 1);
    for (Eigen::Index c = 0; c < dims; ++c) {
      Vector wp = w, wm = w;
      wp(c) += h;
      wm(c) -= h;
      fd(c) = (logreg_objective(X, y, wp, b, opt) - logreg_objective(X, y, wm, b, opt)) / (2 * h);
      an(c) = gw(c);
    }
    fd(dims) = (logreg_objective(X, y, w, b + h, opt) - logreg_objective(X, y, w, b - h, opt)) / (2 * h);
    an(dims) = gb;
    for (Eigen::Index c = 0; c <= dims; ++c)
      EXPECT_LT(std::abs(fd(c) - an(c)) / std::max(std::abs(an(c)), 1e-3), 1e-4) << "instance " << inst << " coord " << c;
  }
}

TEST(LogReg, RejectsDegenerateInput) {
  const Dataset d = blobs(10, 1.0, 3);
  EXPECT_THROW(train_logreg(d.X, Vector::Ones(10), {}), DataError);
  EXPECT_THROW(train_logreg(d.X, Vector::Zero(10), {}), DataError);
  LogRegOptions bad;
  bad.C = 0.0;
  EXPECT_THROW(train_logreg(d.X, d.y, bad), InvalidInput);
}

TEST(LogReg, WeightNormShrinksWithC) {
  const Dataset d = blobs(300, 0.4, 4, 3);
  double prev = 0.0;
  bool first = true;
  for (double C : default_c_grid()) {  // descending C
    const double norm = train_logreg(d.X, d.y, LogRegOptions{C}).w.norm();
    if (!first) EXPECT_GE(norm, prev - 1e-6) << "C=" << C;
    prev = norm;
    first = false;
  }
}

TEST(LogReg, TrainingIsDeterministic) {
  const Dataset d = blobs(100, 0.5, 5);
  const LogRegModel a = train_logreg(d.X, d.y, {});
  const LogRegModel b = train_logreg(d.X, d.y, {});
  EXPECT_EQ(a.w, b.w);
  EXPECT_EQ(a.b, b.b);
}

TEST(RocAuc, RankStatistic) {
  EXPECT_DOUBLE_EQ(roc_auc(vec({0.9, 0.8, 0.1, 0.2}), vec({1, 1, 0, 0})), 1.0);
  EXPECT_DOUBLE_EQ(roc_auc(vec({0.1, 0.2, 0.9, 0.8}), vec({1, 1, 0, 0})), 0.0);
  EXPECT_DOUBLE_EQ(roc_auc(vec({0.5, 0.5, 0.5}), vec({1, 0, 0})), 0.5);
  // One positive above one negative and tied with the other.
  EXPECT_DOUBLE_EQ(roc_auc(vec({0.5, 0.5, 0.1}), vec({1, 0, 0})), 0.75);
  EXPECT_THROW(roc_auc(vec({0.5, 0.1}), vec({1, 1})), DataError);
}

TEST(Split, GroupsStayTogether) {
  const Dataset d = blobs(90, 1.0, 6);
  const Split s = split_by_group(d, 0.1, 9);
  EXPECT_EQ(s.train.size() + s.validation.size(), 90u);
  std::set<std::string> train_groups, val_groups;
  for (auto r : s.train) train_groups.insert(d.groups[static_cast<std::size_t>(r)]);
  for (auto r : s.validation) val_groups.insert(d.groups[static_cast<std::size_t>(r)]);
  EXPECT_EQ(val_groups.size(), 3u);
  for (const auto& g : val_groups) EXPECT_EQ(train_groups.count(g), 0u);
  const Split again = split_by_group(d, 0.1, 9);
  EXPECT_EQ(again.validation, s.validation);
  Dataset one = d;
  one.groups.assign(90, "same");
  EXPECT_THROW(split_by_group(one, 0.1, 9), DataError);
}

TEST(GridSearch, NoiseLabelsGiveChanceAuc) {
  SplitMixRng rng(12);
  Dataset d;
  const Eigen::Index n = 20000;
  d.X.resize(n, 4);
  d.y.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index c = 0; c < 4; ++c) d.X(i, c) = rng.normal();
    d.y(i) = rng.uniform() < 0.5 ? 1.0 : 0.0;
    d.groups.push_back("g" + std::to_string(i / 10));
  }
  const GridSearchResult g = grid_search_C(d, 3);
  EXPECT_GE(g.best_auc, 0.45);
  EXPECT_LE(g.best_auc, 0.55);
  EXPECT_EQ(g.auc_by_C.size(), default_c_grid().size());
}

TEST(GridSearch, SeparableDataTiesBreakToLargestC) {
  const Dataset d = blobs(300, 3.0, 13, 1);
  const GridSearchResult g = grid_search_C(d, 4);
  for (const auto& [C, auc] : g.auc_by_C) EXPECT_EQ(auc, 1.0) << C;
  EXPECT_EQ(g.best_C, 1.0);
}

TEST(GridSearch, EngineeredCorpusIsLearnable) {
  JudgeTrainOptions opt;
  opt.seed = 3;
  opt.calibration.min_important = 1;
  const JudgeTrainReport rep = train_judge(mined_records(), opt);
  EXPECT_GT(rep.judge.validation_auc, 0.9);
  EXPECT_GT(rep.important, 0u);
  EXPECT_LT(rep.important, rep.examples);
}

TEST(Calibration, HandExamples) {
  const Vector scores = vec({0.9, 0.8, 0.7, 0.2, 0.1, 0.1});
  const Vector labels = vec({1, 1, 1, 1, 0, 0});
  EXPECT_DOUBLE_EQ(calibrate_threshold(scores, labels, {0.75, 4}), 0.7);
  EXPECT_DOUBLE_EQ(calibrate_threshold(scores, labels, {1.0, 4}), 0.2);
  const Vector perfect = vec({1, 1, 0, 0});
  EXPECT_DOUBLE_EQ(calibrate_threshold(perfect, vec({1, 1, 0, 0}), {0.9, 1}), 1.0 - 1e-12);
}

TEST(Calibration, ErrorCases) {
  const Vector scores = vec({0.9, 0.8, 0.7, 0.2, 0.1, 0.1});
  const Vector labels = vec({1, 1, 1, 1, 0, 0});
  EXPECT_THROW(calibrate_threshold(scores, labels, {0.9, 10}), DataError);
  EXPECT_THROW(calibrate_threshold(vec({0.0, 0.0, 0.5}), vec({1, 1, 0}), {1.0, 1}), DataError);
  EXPECT_THROW(calibrate_threshold(scores, labels, {0.0, 1}), InvalidInput);
  EXPECT_THROW(calibrate_threshold(scores, vec({1, 0}), {0.9, 1}), InvalidInput);
}

TEST(Calibration, RecallIsMetOnItsOwnData) {
  SplitMixRng rng(14);
  for (int inst = 0; inst < 50; ++inst) {
    Vector s(60), y(60);
    for (Eigen::Index i = 0; i < 60; ++i) {
      y(i) = i < 25 ? 1.0 : 0.0;
      s(i) = rng.uniform();
    }
    const double r = 0.5 + 0.01 * inst;
    const double tau = calibrate_threshold(s, y, {r, 10});
    int hit = 0;
    for (Eigen::Index i = 0; i < 25; ++i) hit += s(i) >= tau;
    EXPECT_GE(hit, r * 25 - 1e-9);
    // Any larger threshold among the scores misses the target.
    double next_up = 2.0;
    for (Eigen::Index i = 0; i < 25; ++i)
      if (s(i) > tau) next_up = std::min(next_up, s(i));
    if (next_up < 2.0) {
      int hit_up = 0;
      for (Eigen::Index i = 0; i < 25; ++i) hit_up += s(i) >= next_up;
      EXPECT_LT(hit_up, r * 25 - 1e-9);
    }
  }
}

TEST(Predict, Examples) {
  JudgeModel j;
  j.config = FeatureConfig::parse("draft_token/draft");
  j.draft_dim = 3;
  j.weights = Vector::Zero(3);
  EXPECT_EQ(predict_importance(j, vec({1, 2, 3})), 0.5);
  j.bias = 10.0;
  EXPECT_GT(predict_importance(j, vec({1, 2, 3})), 0.9999);
  EXPECT_THROW(predict_importance(j, vec({1, 2})), InvalidInput);
}

TEST(Predict, AgreesWithTrainingPathway) {
  const Dataset d = blobs(100, 0.5, 15, 4);
  const LogRegModel m = train_logreg(d.X, d.y, {});
  JudgeModel j;
  j.config = FeatureConfig::parse("draft_token/draft");
  j.draft_dim = 4;
  j.weights = m.w;
  j.bias = m.b;
  const Vector p = predict_proba(m, d.X);
  for (Eigen::Index i = 0; i < d.rows(); ++i)
    EXPECT_NEAR(predict_importance(j, d.X.row(i).transpose()), p(i), 1e-15);
}

TEST(Predict, ScaleRobustness) {
  const Dataset d = blobs(50, 0.5, 16, 3);
  const LogRegModel m = train_logreg(d.X, d.y, {});
  for (double s : {1e-3, 0.5, 7.0, 1e4}) {
    LogRegModel scaled = m;
    scaled.w = m.w / s;
    const Vector a = predict_proba(m, d.X);
    const Vector b = predict_proba(scaled, d.X * s);
    EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-9);
  }
}

TEST(JudgeModel, TrainingIsReproducibleAndRoundTrips) {
  JudgeTrainOptions opt;
  opt.seed = 5;
  opt.calibration.min_important = 1;
  const JudgeModel a = train_judge(mined_records(), opt).judge;
  const JudgeModel b = train_judge(mined_records(), opt).judge;
  EXPECT_EQ(a.weights, b.weights);
  EXPECT_EQ(a.threshold, b.threshold);
  EXPECT_EQ(a.dataset_hash, dataset_hash(mined_records()));
  EXPECT_EQ(a.dataset_hash.size(), 16u);
  EXPECT_GT(a.threshold, 0.0);
  EXPECT_LT(a.threshold, 1.0);

  std::stringstream buf;
  write_judge(a, buf);
  const JudgeModel c = read_judge(buf);
  EXPECT_EQ(c.weights, a.weights);
  EXPECT_EQ(c.bias, a.bias);
  EXPECT_EQ(c.threshold, a.threshold);
  EXPECT_EQ(c.C, a.C);
  EXPECT_EQ(c.config, a.config);
  EXPECT_EQ(c.dataset_hash, a.dataset_hash);
  EXPECT_EQ(c.seed, a.seed);

  const auto& m = testing::arith();
  EXPECT_NO_THROW(c.check_models(m.draft->hidden_dim(), m.target->hidden_dim()));
  EXPECT_THROW(c.check_models(m.draft->hidden_dim() + 1, m.target->hidden_dim()), DataError);
  EXPECT_THROW(c.check_models(m.draft->hidden_dim(), 3), DataError);
}

TEST(JudgeModel, LoadRejectsInconsistentFiles) {
  JudgeModel j;
  j.config = FeatureConfig::parse("draft_token/both");
  j.draft_dim = 2;
  j.target_dim = 1;
  j.weights = vec({0.1, 0.2, 0.3});
  j.threshold = 0.4;
  std::stringstream good;
  write_judge(j, good);
  const std::string text = good.str();
  auto expect_bad = [](std::string t, const std::string& from, const std::string& to) {
    const auto at = t.find(from);
    ASSERT_NE(at, std::string::npos) << from;
    t.replace(at, from.size(), to);
    std::stringstream in(t);
    EXPECT_THROW(read_judge(in), DataError) << to;
  };
  expect_bad(text, "\"draft_dim\": 2", "\"draft_dim\": 3");
  expect_bad(text, "\"threshold\": 0.4", "\"threshold\": 1.5");
  expect_bad(text, "draft_token/both", "draft_token/draft");
  expect_bad(text, "specjudge-judge/1", "other/1");
  expect_bad(text, "\"bias\": 0.0", "\"bias\": \"x\"");
  std::stringstream junk("{");
  EXPECT_THROW(read_judge(junk), DataError);
  EXPECT_THROW(load_judge("/nonexistent/judge.json"), DataError);
}

}  // namespace
}  // namespace specjudge

// Copyright 2026 The specjudge Authors
// SPDX-License-Identifier: Apache-2.0

#include "specjudge/judge.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

#include "specjudge/math.hpp"
#include "specjudge/sampling.hpp"

namespace specjudge {
namespace {

bool uses_draft(const FeatureConfig& c) { return c.model != ModelSource::kTarget; }
bool uses_target(const FeatureConfig& c) { return c.model != ModelSource::kDraft; }

void require_labels(const Vector& y) {
  for (Eigen::Index i = 0; i < y.size(); ++i)
    if (y(i) != 0.0 && y(i) != 1.0) throw InvalidInput("labels must be 0 or 1");
}

}  // namespace

std::string FeatureConfig::to_string() const {
  std::string s = token == TokenSource::kPrev ? "prev" : "draft_token";
  switch (model) {
    case ModelSource::kDraft: return s + "/draft";
    case ModelSource::kTarget: return s + "/target";
    case ModelSource::kBoth: return s + "/both";
  }
  return s;
}

FeatureConfig FeatureConfig::parse(std::string_view text) {
  const auto slash = text.find('/');
  if (slash == std::string_view::npos) throw InvalidInput("feature config must look like <token>/<model>");
  const auto tok = text.substr(0, slash);
  const auto mod = text.substr(slash + 1);
  FeatureConfig c;
  if (tok == "prev") c.token = TokenSource::kPrev;
  else if (tok == "draft_token") c.token = TokenSource::kDraftToken;
  else throw InvalidInput("unknown token source: " + std::string(tok));
  if (mod == "draft") c.model = ModelSource::kDraft;
  else if (mod == "target") c.model = ModelSource::kTarget;
  else if (mod == "both") c.model = ModelSource::kBoth;
  else throw InvalidInput("unknown model source: " + std::string(mod));
  return c;
}

Eigen::Index FeatureConfig::dim(Eigen::Index draft_dim, Eigen::Index target_dim) const {
  return (uses_draft(*this) ? draft_dim : 0) + (uses_target(*this) ? target_dim : 0);
}

Vector assemble_features(const Vector& draft_hidden, const Vector& target_hidden, const FeatureConfig& cfg) {
  const bool d = uses_draft(cfg), t = uses_target(cfg);
  if (d && draft_hidden.size() == 0) throw InvalidInput("features: draft hidden state missing");
  if (t && target_hidden.size() == 0) throw InvalidInput("features: target hidden state missing");
  Vector out(cfg.dim(draft_hidden.size(), target_hidden.size()));
  Eigen::Index at = 0;
  if (d) {
    out.segment(at, draft_hidden.size()) = draft_hidden;
    at += draft_hidden.size();
  }
  if (t) out.segment(at, target_hidden.size()) = target_hidden;
  return out;
}

Vector assemble_features(const MismatchRecord& record, const FeatureConfig& cfg) {
  if (cfg.token == TokenSource::kPrev)
    return assemble_features(record.prev_draft_hidden, record.prev_target_hidden, cfg);
  return assemble_features(record.draft_hidden, record.target_hidden, cfg);
}

Dataset Dataset::subset(const std::vector<Eigen::Index>& rows) const {
  Dataset out;
  out.X.resize(static_cast<Eigen::Index>(rows.size()), X.cols());
  out.y.resize(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto r = rows[i];
    out.X.row(static_cast<Eigen::Index>(i)) = X.row(r);
    out.y(static_cast<Eigen::Index>(i)) = y(r);
    out.groups.push_back(groups[static_cast<std::size_t>(r)]);
  }
  return out;
}

Dataset make_dataset(const std::vector<MismatchRecord>& records, const FeatureConfig& cfg) {
  Dataset data;
  if (records.empty()) return data;
  const Vector first = assemble_features(records.front(), cfg);
  data.X.resize(static_cast<Eigen::Index>(records.size()), first.size());
  data.y.resize(static_cast<Eigen::Index>(records.size()));
  for (std::size_t i = 0; i < records.size(); ++i) {
    const Vector f = assemble_features(records[i], cfg);
    if (f.size() != first.size()) throw DataError("features: inconsistent dimension in record " + std::to_string(i));
    require_finite(f, "features");
    data.X.row(static_cast<Eigen::Index>(i)) = f.transpose();
    data.y(static_cast<Eigen::Index>(i)) = records[i].important ? 1.0 : 0.0;
    data.groups.push_back(records[i].task_id);
  }
  return data;
}

double logreg_objective(const Matrix& X, const Vector& y, const Vector& w, double b, const LogRegOptions& opt,
                        Vector* grad_w, double* grad_b) {
  const Vector z = (X * w).array() + b;
  const Vector s = (y.array() * (opt.positive_weight - 1.0) + 1.0).matrix();
  const double total = s.sum();
  double loss = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) loss += s(i) * (softplus(z(i)) - y(i) * z(i));
  loss = loss / total + 0.5 * opt.C * w.squaredNorm();
  if (grad_w || grad_b) {
    Vector r(z.size());
    for (Eigen::Index i = 0; i < z.size(); ++i) r(i) = s(i) * (sigmoid(z(i)) - y(i)) / total;
    if (grad_w) *grad_w = X.transpose() * r + opt.C * w;
    if (grad_b) *grad_b = r.sum();
  }
  return loss;
}

LogRegModel train_logreg(const Matrix& X, const Vector& y, const LogRegOptions& opt) {
  if (X.rows() != y.size()) throw InvalidInput("train_logreg: row count differs from label count");
  if (X.rows() == 0) throw DataError("train_logreg: no examples");
  if (!(opt.C > 0.0) || !std::isfinite(opt.C)) throw InvalidInput("train_logreg: C must be > 0");
  if (!(opt.positive_weight > 0.0)) throw InvalidInput("train_logreg: positive_weight must be > 0");
  if (opt.max_iters < 0) throw InvalidInput("train_logreg: max_iters must be >= 0");
  require_finite(X, "train_logreg features");
  require_labels(y);
  const double pos = y.sum();
  if (pos == 0.0 || pos == static_cast<double>(y.size()))
    throw DataError("train_logreg: degenerate data, only one class present");

  constexpr double kArmijo = 1e-4;
  LogRegModel m;
  m.w = Vector::Zero(X.cols());
  Vector g;
  double gb = 0.0;
  double f = logreg_objective(X, y, m.w, m.b, opt, &g, &gb);
  double step = 1.0;
  for (; m.iterations < opt.max_iters; ++m.iterations) {
    const double gn2 = g.squaredNorm() + gb * gb;
    m.grad_norm = std::sqrt(gn2);
    if (m.grad_norm < opt.tol) break;
    double a = step;
    Vector w_next;
    double b_next = 0.0;
    for (;;) {
      w_next = m.w - a * g;
      b_next = m.b - a * gb;
      if (logreg_objective(X, y, w_next, b_next, opt) <= f - kArmijo * a * gn2) break;
      a *= 0.5;
      if (a < 1e-20) return m;
    }
    m.w = std::move(w_next);
    m.b = b_next;
    step = 2.0 * a;
    f = logreg_objective(X, y, m.w, m.b, opt, &g, &gb);
  }
  m.grad_norm = std::sqrt(g.squaredNorm() + gb * gb);
  return m;
}

Vector predict_proba(const LogRegModel& model, const Matrix& X) {
  if (X.cols() != model.w.size()) throw InvalidInput("predict: feature dimension mismatch");
  Vector z = (X * model.w).array() + model.b;
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = sigmoid(z(i));
  return z;
}

double roc_auc(const Vector& scores, const Vector& labels) {
  if (scores.size() != labels.size()) throw InvalidInput("roc_auc: size mismatch");
  require_labels(labels);
  const auto n = static_cast<std::size_t>(scores.size());
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores(static_cast<Eigen::Index>(a)) < scores(static_cast<Eigen::Index>(b));
  });
  double pos = 0.0, rank_sum = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores(static_cast<Eigen::Index>(order[j])) == scores(static_cast<Eigen::Index>(order[i]))) ++j;
    const double mid_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels(static_cast<Eigen::Index>(order[k])) == 1.0) {
        pos += 1.0;
        rank_sum += mid_rank;
      }
    }
    i = j;
  }
  const double neg = static_cast<double>(n) - pos;
  if (pos == 0.0 || neg == 0.0) throw DataError("roc_auc: both classes are required");
  return (rank_sum - pos * (pos + 1.0) / 2.0) / (pos * neg);
}

std::vector<double> default_c_grid() { return {1e0, 1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7}; }

Split split_by_group(const Dataset& data, double validation_fraction, std::uint64_t seed) {
  if (!(validation_fraction > 0.0 && validation_fraction < 1.0))
    throw InvalidInput("split: validation fraction must lie in (0, 1)");
  const std::set<std::string> uniq(data.groups.begin(), data.groups.end());
  std::vector<std::string> ids(uniq.begin(), uniq.end());
  if (ids.size() < 2) throw DataError("split: need at least two task ids");
  SplitMixRng rng(seed);
  for (std::size_t i = ids.size() - 1; i > 0; --i)
    std::swap(ids[i], ids[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i)))]);
  const auto n_val = std::clamp<std::size_t>(
      static_cast<std::size_t>(std::llround(validation_fraction * static_cast<double>(ids.size()))), 1, ids.size() - 1);
  const std::set<std::string> val(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(n_val));
  Split s;
  for (Eigen::Index i = 0; i < data.rows(); ++i)
    (val.count(data.groups[static_cast<std::size_t>(i)]) ? s.validation : s.train).push_back(i);
  return s;
}

GridSearchResult grid_search_C(const Dataset& data, std::uint64_t split_seed, const std::vector<double>& grid,
                               LogRegOptions base, double validation_fraction) {
  if (grid.empty()) throw InvalidInput("grid_search_C: empty grid");
  GridSearchResult out;
  out.split = split_by_group(data, validation_fraction, split_seed);
  const Dataset train = data.subset(out.split.train);
  const Dataset val = data.subset(out.split.validation);
  bool have = false;
  for (double C : grid) {
    base.C = C;
    LogRegModel m = train_logreg(train.X, train.y, base);
    const double auc = roc_auc(predict_proba(m, val.X), val.y);
    out.auc_by_C.emplace_back(C, auc);
    if (!have || auc > out.best_auc || (auc == out.best_auc && C > out.best_C)) {
      have = true;
      out.best_auc = auc;
      out.best_C = C;
      out.model = std::move(m);
    }
  }
  return out;
}

double calibrate_threshold(const Vector& scores, const Vector& labels, const CalibrationOptions& opt) {
  if (scores.size() != labels.size()) throw InvalidInput("calibrate: size mismatch");
  if (!(opt.target_recall > 0.0 && opt.target_recall <= 1.0))
    throw InvalidInput("calibrate: target recall must lie in (0, 1]");
  require_labels(labels);
  std::vector<double> imp;
  for (Eigen::Index i = 0; i < scores.size(); ++i)
    if (labels(i) == 1.0) imp.push_back(scores(i));
  if (imp.size() < std::max<std::size_t>(1, opt.min_important))
    throw DataError("calibrate: need at least " + std::to_string(std::max<std::size_t>(1, opt.min_important)) +
                    " important validation examples, got " + std::to_string(imp.size()));
  std::sort(imp.begin(), imp.end(), std::greater<>());
  // Smallest count of top scores that reaches the target recall.
  const double need = opt.target_recall * static_cast<double>(imp.size());
  auto k = static_cast<std::size_t>(std::ceil(need - 1e-9));
  k = std::clamp<std::size_t>(k, 1, imp.size());
  const double tau = imp[k - 1];
  if (!(tau > 0.0)) throw DataError("calibrate: target recall is unreachable with a positive threshold");
  constexpr double kEps = 1e-12;
  return std::min(tau, 1.0 - kEps);
}

void JudgeModel::check_models(Eigen::Index runtime_draft_dim, Eigen::Index runtime_target_dim) const {
  if (uses_draft(config) && runtime_draft_dim != draft_dim)
    throw DataError("judge expects draft hidden size " + std::to_string(draft_dim) + ", model has " +
                    std::to_string(runtime_draft_dim));
  if (uses_target(config) && runtime_target_dim != target_dim)
    throw DataError("judge expects target hidden size " + std::to_string(target_dim) + ", model has " +
                    std::to_string(runtime_target_dim));
}

double predict_importance(const JudgeModel& judge, const Vector& features) {
  if (features.size() != judge.weights.size())
    throw InvalidInput("predict_importance: feature dimension " + std::to_string(features.size()) + " != " +
                       std::to_string(judge.weights.size()));
  return sigmoid(judge.weights.dot(features) + judge.bias);
}

std::string dataset_hash(const std::vector<MismatchRecord>& records) {
  std::ostringstream os;
  write_dataset(records, os);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : os.str()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

JudgeTrainReport train_judge(const std::vector<MismatchRecord>& records, const JudgeTrainOptions& opt) {
  if (records.empty()) throw DataError("train_judge: empty dataset");
  JudgeTrainReport rep;
  const Dataset data = make_dataset(records, opt.features);
  rep.examples = records.size();
  rep.important = static_cast<std::size_t>(data.y.sum());
  rep.search = grid_search_C(data, opt.seed, opt.grid, opt.logreg);
  const Dataset val = data.subset(rep.search.split.validation);
  const double tau = calibrate_threshold(predict_proba(rep.search.model, val.X), val.y, opt.calibration);

  JudgeModel& j = rep.judge;
  j.config = opt.features;
  const auto& r0 = records.front();
  const bool prev = opt.features.token == TokenSource::kPrev;
  j.draft_dim = (prev ? r0.prev_draft_hidden : r0.draft_hidden).size();
  j.target_dim = (prev ? r0.prev_target_hidden : r0.target_hidden).size();
  j.weights = rep.search.model.w;
  j.bias = rep.search.model.b;
  j.C = rep.search.best_C;
  j.threshold = tau;
  j.dataset_hash = dataset_hash(records);
  j.seed = opt.seed;
  j.validation_auc = rep.search.best_auc;
  j.target_recall = opt.calibration.target_recall;
  return rep;
}

void write_judge(const JudgeModel& judge, std::ostream& out) {
  nlohmann::ordered_json doc;
  doc["format"] = "specjudge-judge/1";
  doc["feature_config"] = judge.config.to_string();
  doc["draft_dim"] = judge.draft_dim;
  doc["target_dim"] = judge.target_dim;
  doc["feature_dim"] = judge.feature_dim();
  doc["weights"] = std::vector<double>(judge.weights.data(), judge.weights.data() + judge.weights.size());
  doc["bias"] = judge.bias;
  doc["C"] = judge.C;
  doc["threshold"] = judge.threshold;
  doc["training"] = {{"dataset_hash", judge.dataset_hash},
                     {"seed", judge.seed},
                     {"validation_auc", judge.validation_auc},
                     {"target_recall", judge.target_recall}};
  out << doc.dump(2) << '\n';
}

JudgeModel read_judge(std::istream& in) {
  JudgeModel j;
  try {
    const auto doc = nlohmann::json::parse(in);
    if (doc.at("format").get<std::string>() != "specjudge-judge/1") throw DataError("unknown judge format");
    j.config = FeatureConfig::parse(doc.at("feature_config").get<std::string>());
    j.draft_dim = doc.at("draft_dim").get<Eigen::Index>();
    j.target_dim = doc.at("target_dim").get<Eigen::Index>();
    const auto w = doc.at("weights").get<std::vector<double>>();
    j.weights = Eigen::Map<const Vector>(w.data(), static_cast<Eigen::Index>(w.size()));
    j.bias = doc.at("bias").get<double>();
    j.C = doc.at("C").get<double>();
    j.threshold = doc.at("threshold").get<double>();
    const auto& tr = doc.at("training");
    j.dataset_hash = tr.at("dataset_hash").get<std::string>();
    j.seed = tr.at("seed").get<std::uint64_t>();
    j.validation_auc = tr.at("validation_auc").get<double>();
    j.target_recall = tr.at("target_recall").get<double>();
    if (doc.at("feature_dim").get<Eigen::Index>() != j.feature_dim() || j.weights.size() != j.feature_dim())
      throw DataError("weights do not match the feature layout");
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("judge file: ") + e.what());
  } catch (const InvalidInput& e) {
    throw DataError(std::string("judge file: ") + e.what());
  }
  if (!(j.threshold > 0.0 && j.threshold < 1.0)) throw DataError("judge file: threshold must lie in (0, 1)");
  if (!j.weights.allFinite() || !std::isfinite(j.bias)) throw DataError("judge file: non-finite weights");
  return j;
}

void save_judge(const JudgeModel& judge, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path);
  write_judge(judge, out);
}

JudgeModel load_judge(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path);
  return read_judge(in);
}

}  // namespace specjudge

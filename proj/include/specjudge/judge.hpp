// Copyright 2026 The specjudge Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "specjudge/core.hpp"
#include "specjudge/mining.hpp"

namespace specjudge {

/// Which position's hidden state describes a mismatch: the one that predicted
/// the mismatched token (kPrev) or the one that encodes the drafted token.
enum class TokenSource { kPrev, kDraftToken };
enum class ModelSource { kDraft, kTarget, kBoth };

struct FeatureConfig {
  TokenSource token = TokenSource::kDraftToken;
  ModelSource model = ModelSource::kBoth;

  /// "draft_token/both", "prev/target", ...
  std::string to_string() const;
  static FeatureConfig parse(std::string_view text);
  /// d_draft, d_target or d_draft + d_target.
  Eigen::Index dim(Eigen::Index draft_dim, Eigen::Index target_dim) const;
  bool operator==(const FeatureConfig&) const = default;
};

/// Concatenation of the selected hidden vectors, draft part first.
Vector assemble_features(const MismatchRecord& record, const FeatureConfig& cfg);
/// Same layout from hidden states already at hand during decoding.
Vector assemble_features(const Vector& draft_hidden, const Vector& target_hidden, const FeatureConfig& cfg);

/// Row-major design matrix plus labels; `groups` holds the task id of each row.
struct Dataset {
  Matrix X;
  Vector y;
  std::vector<std::string> groups;

  Eigen::Index rows() const noexcept { return X.rows(); }
  Eigen::Index cols() const noexcept { return X.cols(); }
  Dataset subset(const std::vector<Eigen::Index>& rows) const;
};

Dataset make_dataset(const std::vector<MismatchRecord>& records, const FeatureConfig& cfg);

struct LogRegOptions {
  /// L2 coefficient of C * |w|^2 / 2.
  double C = 1.0;
  int max_iters = 2000;
  /// Stop once the gradient norm falls below this.
  double tol = 1e-6;
  /// Loss weight of the positive class. 1 trains unweighted.
  double positive_weight = 1.0;
};

struct LogRegModel {
  Vector w;
  double b = 0.0;
  int iterations = 0;
  double grad_norm = 0.0;
};

/// Weighted mean log-loss + C |w|^2 / 2. Fills the gradient when asked.
double logreg_objective(const Matrix& X, const Vector& y, const Vector& w, double b, const LogRegOptions& opt,
                        Vector* grad_w = nullptr, double* grad_b = nullptr);

/// Full-batch gradient descent with backtracking line search. Both classes
/// must be present.
LogRegModel train_logreg(const Matrix& X, const Vector& y, const LogRegOptions& opt);

/// sigmoid(Xw + b) per row.
Vector predict_proba(const LogRegModel& model, const Matrix& X);

/// Area under the ROC curve by the rank statistic; tied scores count 1/2.
double roc_auc(const Vector& scores, const Vector& labels);

/// 1e0, 1e-1, ..., 1e-7.
std::vector<double> default_c_grid();

/// Task-level split; rows of one task id land on the same side.
struct Split {
  std::vector<Eigen::Index> train;
  std::vector<Eigen::Index> validation;
};
Split split_by_group(const Dataset& data, double validation_fraction, std::uint64_t seed);

struct GridSearchResult {
  double best_C = 0.0;
  double best_auc = 0.0;
  std::vector<std::pair<double, double>> auc_by_C;
  /// Trained at best_C on the training side of the split.
  LogRegModel model;
  Split split;
};

/// Trains once per C and keeps the best validation AUC; ties go to the
/// larger C.
GridSearchResult grid_search_C(const Dataset& data, std::uint64_t split_seed,
                               const std::vector<double>& grid = default_c_grid(), LogRegOptions base = {},
                               double validation_fraction = 0.1);

struct CalibrationOptions {
  double target_recall = 0.90;
  std::size_t min_important = 10;
};

/// Largest tau with fraction(p >= tau | important) >= target recall, clamped
/// below 1. A token is then accepted iff p < tau.
double calibrate_threshold(const Vector& scores, const Vector& labels, const CalibrationOptions& opt = {});

/// Linear importance classifier together with the feature layout it expects.
struct JudgeModel {
  FeatureConfig config;
  Eigen::Index draft_dim = 0;
  Eigen::Index target_dim = 0;
  Vector weights;
  double bias = 0.0;
  double C = 1.0;
  double threshold = 0.5;
  std::string dataset_hash;
  std::uint64_t seed = 0;
  double validation_auc = 0.0;
  double target_recall = 0.0;

  Eigen::Index feature_dim() const { return config.dim(draft_dim, target_dim); }
  /// Throws DataError unless the hidden sizes match the layout.
  void check_models(Eigen::Index runtime_draft_dim, Eigen::Index runtime_target_dim) const;
};

/// sigmoid(w . x + b).
double predict_importance(const JudgeModel& judge, const Vector& features);

struct JudgeTrainOptions {
  FeatureConfig features;
  std::uint64_t seed = 0;
  CalibrationOptions calibration;
  LogRegOptions logreg;
  std::vector<double> grid = default_c_grid();
};

struct JudgeTrainReport {
  JudgeModel judge;
  GridSearchResult search;
  std::size_t examples = 0;
  std::size_t important = 0;
};

/// Grid search, then threshold calibration on the validation side.
JudgeTrainReport train_judge(const std::vector<MismatchRecord>& records, const JudgeTrainOptions& opt);

/// FNV-1a of the serialized dataset, as 16 hex digits.
std::string dataset_hash(const std::vector<MismatchRecord>& records);

void write_judge(const JudgeModel& judge, std::ostream& out);
JudgeModel read_judge(std::istream& in);
void save_judge(const JudgeModel& judge, const std::string& path);
JudgeModel load_judge(const std::string& path);

}  // namespace specjudge

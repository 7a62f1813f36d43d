// Copyright 2026 The concern-miner Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Classification metrics, stratified cross-validation, best-fold
// selection and inter-rater agreement.

#ifndef CMINE_EVALUATE_H_
#define CMINE_EVALUATE_H_

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cmine/classify.h"
#include "cmine/corpus.h"
#include "cmine/features.h"
#include "json.hpp"

namespace cmine::evaluate {

// nullopt marks an undefined metric (e.g. precision with no predicted
// positives). Undefined is never reported as 0.
using Metric = std::optional<double>;

struct ConfusionMatrix {
  int64_t tp = 0, fp = 0, tn = 0, fn = 0;

  int64_t total() const { return tp + fp + tn + fn; }
  Metric tpr() const;
  Metric fpr() const;
};

struct MetricsReport {
  Metric precision, recall, f1, accuracy, auc;
  ConfusionMatrix confusion;

  nlohmann::json ToJson() const;
  static MetricsReport FromJson(const nlohmann::json& j);
};

// y values are 0/1; scores rank positives (higher = more fairness-like).
// AUC is the Mann-Whitney statistic with ties credited 0.5; undefined when
// either class is absent.
MetricsReport ComputeMetrics(std::span<const int> y_true,
                             std::span<const int> y_pred,
                             std::span<const double> scores);
Metric RankAuc(std::span<const int> y_true, std::span<const double> scores);

// Stratified assignment of sample indices to k folds. Within each class the
// indices are shuffled and dealt round-robin, continuing the deal across
// classes, so fold sizes differ by at most one.
std::vector<std::vector<size_t>> StratifiedFolds(std::span<const int> y,
                                                 int k, uint64_t seed);
// Plain shuffled split, for comparison against the stratified default.
std::vector<std::vector<size_t>> ShuffledFolds(size_t n, int k,
                                               uint64_t seed);

struct FoldResult {
  int fold_index = 0;
  MetricsReport metrics;
  std::shared_ptr<const classify::LogisticModel> model;
  std::vector<size_t> test_indices;
  std::vector<double> test_scores;
};

struct MetricSummary {
  Metric mean;
  Metric stddev;  // population standard deviation over defined folds
};

struct CrossValidationResult {
  std::vector<FoldResult> folds;
  std::map<std::string, MetricSummary> summary;  // by metric name

  nlohmann::json ToJson() const;
};

// Trains on train_indices and returns a model; called once per fold.
using FoldTrainer = std::function<std::shared_ptr<const classify::LogisticModel>(
    const std::vector<size_t>& train_indices)>;
// Scores one sample with the fold's model.
using FoldScorer = std::function<double(const classify::LogisticModel&,
                                        size_t sample_index)>;

struct CrossValidationOptions {
  int k = 10;
  uint64_t seed = 0;
  bool stratified = true;
};

// Generic driver: partitions, trains per fold, scores the held-out part.
CrossValidationResult CrossValidate(std::span<const int> y,
                                    const CrossValidationOptions& options,
                                    const FoldTrainer& trainer,
                                    const FoldScorer& scorer);

// Pre-featurized samples; no per-fold feature fitting.
CrossValidationResult CrossValidate(
    std::span<const features::FeatureVector> x, std::span<const int> y,
    const classify::TrainConfig& config,
    const CrossValidationOptions& options);

struct FeatureConfig {
  std::vector<features::BlockKind> blocks = {features::BlockKind::kTfidf,
                                             features::BlockKind::kWordAverage,
                                             features::BlockKind::kSentence};
  std::vector<int> ngram_sizes = {4, 5, 6};
  size_t max_features = 50000;
  bool standardize_dense = true;

  nlohmann::json ToJson() const;
  static FeatureConfig FromJson(const nlohmann::json& j);
};

// Observes which reviews each fitted feature statistic saw, per fold.
using FitObserver =
    std::function<void(int fold_index, const std::vector<std::string>& ids)>;

// Fits TF-IDF and the standardizer on the training reviews only.
std::shared_ptr<features::FeatureUnionModel> FitFeatureUnion(
    std::span<const corpus::Review> training, const FeatureConfig& config,
    std::shared_ptr<const features::WordVectorTable> word_table,
    std::shared_ptr<const features::SentenceEmbeddingMatrix> sentence_matrix);

// Full pipeline per fold: feature fitting and training on the training
// part, scoring on the held-out part. Each fold's model carries its layout.
CrossValidationResult CrossValidateReviews(
    const std::vector<corpus::Review>& reviews, std::span<const int> y,
    const FeatureConfig& feature_config, const classify::TrainConfig& config,
    std::shared_ptr<const features::WordVectorTable> word_table,
    std::shared_ptr<const features::SentenceEmbeddingMatrix> sentence_matrix,
    const CrossValidationOptions& options,
    const FitObserver& observer = nullptr);

enum class SelectionPolicy { kMaxPrecisionThenAuc, kMaxAuc, kMaxF1 };
SelectionPolicy ParsePolicy(std::string_view name);

// Lexicographic on the policy's keys; undefined ranks lowest; ties go to
// the lowest fold index. Throws UsageError on empty input.
const FoldResult& SelectBestFold(std::span<const FoldResult> results,
                                 SelectionPolicy policy =
                                     SelectionPolicy::kMaxPrecisionThenAuc);

struct AgreementReport {
  Metric kappa;
  double observed_agreement = 0.0;
  double expected_agreement = 0.0;
  std::vector<std::string> disagreements;

  nlohmann::json ToJson() const;
};

// labels_a[i] and labels_b[i] label review_ids[i].
AgreementReport CohenKappa(std::span<const Label> labels_a,
                           std::span<const Label> labels_b,
                           std::span<const std::string> review_ids = {});

struct Resolution {
  std::string review_id;
  Label final_label;
};

// Majority vote settles reviews with >= 3 coders and a strict majority;
// unanimous reviews settle directly; remaining ties need a resolution.
// Throws DataError for a resolution that names no disagreement.
std::vector<corpus::LabeledReview> ResolveDisagreements(
    std::vector<corpus::LabeledReview> labels,
    std::span<const Resolution> resolutions);

// "P R F1 ACC AUC" in percent with two decimals.
std::string FormatMetricsTable(
    const std::vector<std::pair<std::string, MetricsReport>>& rows);

}  // namespace cmine::evaluate

#endif  // CMINE_EVALUATE_H_

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

#include "cmine/evaluate.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>
#include <sstream>

namespace cmine::evaluate {

using nlohmann::json;

namespace {

Metric Ratio(int64_t num, int64_t den) {
  if (den == 0) return std::nullopt;
  return static_cast<double>(num) / static_cast<double>(den);
}

json MetricJson(const Metric& m) { return m ? json(*m) : json(nullptr); }

Metric MetricFromJson(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<double>();
}

}  // namespace

Metric ConfusionMatrix::tpr() const { return Ratio(tp, tp + fn); }
Metric ConfusionMatrix::fpr() const { return Ratio(fp, fp + tn); }

json MetricsReport::ToJson() const {
  return {{"precision", MetricJson(precision)},
          {"recall", MetricJson(recall)},
          {"f1", MetricJson(f1)},
          {"accuracy", MetricJson(accuracy)},
          {"auc", MetricJson(auc)},
          {"confusion",
           {{"tp", confusion.tp},
            {"fp", confusion.fp},
            {"tn", confusion.tn},
            {"fn", confusion.fn}}}};
}

MetricsReport MetricsReport::FromJson(const json& j) {
  MetricsReport r;
  r.precision = MetricFromJson(j.at("precision"));
  r.recall = MetricFromJson(j.at("recall"));
  r.f1 = MetricFromJson(j.at("f1"));
  r.accuracy = MetricFromJson(j.at("accuracy"));
  r.auc = MetricFromJson(j.at("auc"));
  const json& c = j.at("confusion");
  r.confusion = {c.at("tp").get<int64_t>(), c.at("fp").get<int64_t>(),
                 c.at("tn").get<int64_t>(), c.at("fn").get<int64_t>()};
  return r;
}

Metric RankAuc(std::span<const int> y_true, std::span<const double> scores) {
  const size_t n = y_true.size();
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](size_t a, size_t b) { return scores[a] < scores[b]; });
  // Sum of (1-based, tie-averaged) ranks of the positives, doubled so that
  // every quantity stays an exact integer.
  int64_t twice_rank_sum = 0;
  int64_t positives = 0;
  size_t i = 0;
  while (i < n) {
    size_t j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const auto twice_avg = static_cast<int64_t>(i + 1 + j + 1);
    for (size_t k = i; k <= j; ++k) {
      if (y_true[order[k]] == 1) {
        twice_rank_sum += twice_avg;
        ++positives;
      }
    }
    i = j + 1;
  }
  const int64_t negatives = static_cast<int64_t>(n) - positives;
  if (positives == 0 || negatives == 0) return std::nullopt;
  const int64_t twice_u = twice_rank_sum - positives * (positives + 1);
  return static_cast<double>(twice_u) /
         (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
}

MetricsReport ComputeMetrics(std::span<const int> y_true,
                             std::span<const int> y_pred,
                             std::span<const double> scores) {
  if (y_true.empty() || y_true.size() != y_pred.size() ||
      y_true.size() != scores.size()) {
    throw UsageError("metrics need equal, non-zero lengths");
  }
  MetricsReport r;
  for (size_t i = 0; i < y_true.size(); ++i) {
    const bool truth = y_true[i] == 1;
    const bool pred = y_pred[i] == 1;
    if (truth && pred) ++r.confusion.tp;
    if (!truth && pred) ++r.confusion.fp;
    if (!truth && !pred) ++r.confusion.tn;
    if (truth && !pred) ++r.confusion.fn;
  }
  const ConfusionMatrix& c = r.confusion;
  r.precision = Ratio(c.tp, c.tp + c.fp);
  r.recall = Ratio(c.tp, c.tp + c.fn);
  r.accuracy = Ratio(c.tp + c.tn, c.total());
  if (r.precision && r.recall) {
    const double sum = *r.precision + *r.recall;
    r.f1 = sum > 0.0 ? 2.0 * *r.precision * *r.recall / sum : 0.0;
  }
  r.auc = RankAuc(y_true, scores);
  return r;
}

std::vector<std::vector<size_t>> StratifiedFolds(std::span<const int> y,
                                                 int k, uint64_t seed) {
  if (k < 2) throw UsageError("cross-validation needs k >= 2");
  std::vector<size_t> by_class[2];
  for (size_t i = 0; i < y.size(); ++i) {
    if (y[i] != 0 && y[i] != 1) throw DataError("labels must be 0 or 1");
    by_class[y[i]].push_back(i);
  }
  for (int c = 0; c < 2; ++c) {
    if (by_class[c].size() < static_cast<size_t>(k)) {
      throw DataError("class " + std::string(LabelName(static_cast<Label>(c))) +
                      " has " + std::to_string(by_class[c].size()) +
                      " samples, fewer than k=" + std::to_string(k));
    }
  }
  Rng rng(seed);
  std::vector<std::vector<size_t>> folds(k);
  size_t deal = 0;
  for (auto& members : by_class) {
    rng.Shuffle(members);
    for (size_t index : members) folds[deal++ % k].push_back(index);
  }
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

std::vector<std::vector<size_t>> ShuffledFolds(size_t n, int k,
                                               uint64_t seed) {
  if (k < 2 || n < static_cast<size_t>(k)) {
    throw UsageError("cross-validation needs k >= 2 and n >= k");
  }
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  rng.Shuffle(order);
  std::vector<std::vector<size_t>> folds(k);
  for (size_t i = 0; i < n; ++i) folds[i % k].push_back(order[i]);
  for (auto& f : folds) std::sort(f.begin(), f.end());
  return folds;
}

namespace {

void Summarize(CrossValidationResult& result) {
  auto add = [&](const std::string& name, auto getter) {
    std::vector<double> values;
    for (const FoldResult& f : result.folds) {
      if (Metric m = getter(f.metrics)) values.push_back(*m);
    }
    MetricSummary s;
    if (!values.empty()) {
      double mean = std::accumulate(values.begin(), values.end(), 0.0) /
                    static_cast<double>(values.size());
      double var = 0.0;
      for (double v : values) var += (v - mean) * (v - mean);
      s.mean = mean;
      s.stddev = std::sqrt(var / static_cast<double>(values.size()));
    }
    result.summary[name] = s;
  };
  add("precision", [](const MetricsReport& m) { return m.precision; });
  add("recall", [](const MetricsReport& m) { return m.recall; });
  add("f1", [](const MetricsReport& m) { return m.f1; });
  add("accuracy", [](const MetricsReport& m) { return m.accuracy; });
  add("auc", [](const MetricsReport& m) { return m.auc; });
}

}  // namespace

json CrossValidationResult::ToJson() const {
  json j;
  json folds_json = json::array();
  for (const FoldResult& f : folds) {
    folds_json.push_back({{"fold_index", f.fold_index},
                          {"metrics", f.metrics.ToJson()},
                          {"test_indices", f.test_indices}});
  }
  j["folds"] = folds_json;
  json s = json::object();
  for (const auto& [name, summary] : summary) {
    s[name] = {{"mean", MetricJson(summary.mean)},
               {"std", MetricJson(summary.stddev)}};
  }
  j["summary"] = s;
  return j;
}

CrossValidationResult CrossValidate(std::span<const int> y,
                                    const CrossValidationOptions& options,
                                    const FoldTrainer& trainer,
                                    const FoldScorer& scorer) {
  auto folds = options.stratified
                   ? StratifiedFolds(y, options.k, options.seed)
                   : ShuffledFolds(y.size(), options.k, options.seed);
  CrossValidationResult result;
  for (int f = 0; f < options.k; ++f) {
    std::vector<size_t> train;
    for (int g = 0; g < options.k; ++g) {
      if (g != f) train.insert(train.end(), folds[g].begin(), folds[g].end());
    }
    std::sort(train.begin(), train.end());
    auto model = trainer(train);
    FoldResult fold;
    fold.fold_index = f;
    fold.model = model;
    fold.test_indices = folds[f];
    std::vector<int> truth, predicted;
    for (size_t i : folds[f]) {
      double score = scorer(*model, i);
      fold.test_scores.push_back(score);
      truth.push_back(y[i]);
      predicted.push_back(score >= model->threshold() ? 1 : 0);
    }
    fold.metrics = ComputeMetrics(truth, predicted, fold.test_scores);
    result.folds.push_back(std::move(fold));
  }
  Summarize(result);
  return result;
}

CrossValidationResult CrossValidate(
    std::span<const features::FeatureVector> x, std::span<const int> y,
    const classify::TrainConfig& config,
    const CrossValidationOptions& options) {
  if (x.size() != y.size()) throw DataError("feature/label count mismatch");
  auto trainer = [&](const std::vector<size_t>& train) {
    std::vector<features::FeatureVector> xs;
    std::vector<int> ys;
    for (size_t i : train) {
      xs.push_back(x[i]);
      ys.push_back(y[i]);
    }
    return std::make_shared<const classify::LogisticModel>(
        classify::Train(xs, ys, config));
  };
  auto scorer = [&](const classify::LogisticModel& m, size_t i) {
    return classify::PredictProba(m, x[i]);
  };
  return CrossValidate(y, options, trainer, scorer);
}

json FeatureConfig::ToJson() const {
  json names = json::array();
  for (auto b : blocks) names.push_back(features::BlockName(b));
  return {{"blocks", names},
          {"ngram_sizes", ngram_sizes},
          {"max_features", max_features},
          {"standardize_dense", standardize_dense}};
}

FeatureConfig FeatureConfig::FromJson(const json& j) {
  FeatureConfig c;
  if (j.contains("blocks")) {
    c.blocks.clear();
    for (const json& b : j.at("blocks")) {
      c.blocks.push_back(features::ParseBlockName(b.get<std::string>()));
    }
  }
  c.ngram_sizes = j.value("ngram_sizes", c.ngram_sizes);
  c.max_features = j.value("max_features", c.max_features);
  c.standardize_dense = j.value("standardize_dense", c.standardize_dense);
  return c;
}

std::shared_ptr<features::FeatureUnionModel> FitFeatureUnion(
    std::span<const corpus::Review> training, const FeatureConfig& config,
    std::shared_ptr<const features::WordVectorTable> word_table,
    std::shared_ptr<const features::SentenceEmbeddingMatrix> sentence_matrix) {
  std::optional<features::TfidfModel> tfidf;
  if (std::find(config.blocks.begin(), config.blocks.end(),
                features::BlockKind::kTfidf) != config.blocks.end()) {
    std::vector<std::string> bodies;
    for (const corpus::Review& r : training) bodies.push_back(r.body);
    tfidf = features::FitTfidf(bodies, config.ngram_sizes, config.max_features);
  }
  auto model = std::make_shared<features::FeatureUnionModel>(
      features::BuildUnion(config.blocks, std::move(tfidf),
                           std::move(word_table), std::move(sentence_matrix)));
  if (config.standardize_dense) model->FitStandardizer(training);
  return model;
}

CrossValidationResult CrossValidateReviews(
    const std::vector<corpus::Review>& reviews, std::span<const int> y,
    const FeatureConfig& feature_config, const classify::TrainConfig& config,
    std::shared_ptr<const features::WordVectorTable> word_table,
    std::shared_ptr<const features::SentenceEmbeddingMatrix> sentence_matrix,
    const CrossValidationOptions& options, const FitObserver& observer) {
  if (reviews.size() != y.size()) {
    throw DataError("review/label count mismatch");
  }
  int fold_counter = 0;
  auto trainer = [&](const std::vector<size_t>& train) {
    std::vector<corpus::Review> training;
    std::vector<std::string> ids;
    for (size_t i : train) {
      training.push_back(reviews[i]);
      ids.push_back(reviews[i].id);
    }
    if (observer) observer(fold_counter, ids);
    ++fold_counter;
    auto layout =
        FitFeatureUnion(training, feature_config, word_table, sentence_matrix);
    std::vector<features::FeatureVector> xs;
    std::vector<int> ys;
    for (size_t i : train) {
      xs.push_back(features::TransformUnion(*layout, reviews[i]));
      ys.push_back(y[i]);
    }
    auto model = std::make_shared<classify::LogisticModel>(
        classify::Train(xs, ys, config));
    model->set_layout(layout);
    return std::shared_ptr<const classify::LogisticModel>(model);
  };
  auto scorer = [&](const classify::LogisticModel& m, size_t i) {
    return classify::PredictProba(m,
                                  features::TransformUnion(*m.layout(), reviews[i]));
  };
  return CrossValidate(y, options, trainer, scorer);
}

SelectionPolicy ParsePolicy(std::string_view name) {
  if (name == "max_precision_then_auc") return SelectionPolicy::kMaxPrecisionThenAuc;
  if (name == "max_auc") return SelectionPolicy::kMaxAuc;
  if (name == "max_f1") return SelectionPolicy::kMaxF1;
  throw UsageError("unknown selection policy '" + std::string(name) + "'");
}

const FoldResult& SelectBestFold(std::span<const FoldResult> results,
                                 SelectionPolicy policy) {
  if (results.empty()) throw UsageError("no fold results to select from");
  auto key = [policy](const MetricsReport& m) {
    auto v = [](const Metric& x) { return x.value_or(-1.0); };
    switch (policy) {
      case SelectionPolicy::kMaxPrecisionThenAuc:
        return std::vector<double>{v(m.precision), v(m.auc), v(m.f1)};
      case SelectionPolicy::kMaxAuc:
        return std::vector<double>{v(m.auc)};
      case SelectionPolicy::kMaxF1:
        return std::vector<double>{v(m.f1)};
    }
    return std::vector<double>{};
  };
  const FoldResult* best = &results[0];
  for (const FoldResult& r : results.subspan(1)) {
    auto a = key(r.metrics), b = key(best->metrics);
    if (a > b || (a == b && r.fold_index < best->fold_index)) best = &r;
  }
  return *best;
}

json AgreementReport::ToJson() const {
  return {{"kappa", MetricJson(kappa)},
          {"observed_agreement", observed_agreement},
          {"expected_agreement", expected_agreement},
          {"disagreements", disagreements}};
}

AgreementReport CohenKappa(std::span<const Label> labels_a,
                           std::span<const Label> labels_b,
                           std::span<const std::string> review_ids) {
  if (labels_a.empty() || labels_a.size() != labels_b.size()) {
    throw UsageError("kappa needs two equal-length, non-empty label lists");
  }
  if (!review_ids.empty() && review_ids.size() != labels_a.size()) {
    throw UsageError("review id count does not match labels");
  }
  const double n = static_cast<double>(labels_a.size());
  int64_t agree = 0, a_pos = 0, b_pos = 0;
  AgreementReport report;
  for (size_t i = 0; i < labels_a.size(); ++i) {
    if (labels_a[i] == labels_b[i]) {
      ++agree;
    } else if (!review_ids.empty()) {
      report.disagreements.push_back(review_ids[i]);
    }
    a_pos += labels_a[i] == Label::kFairness;
    b_pos += labels_b[i] == Label::kFairness;
  }
  const double po = static_cast<double>(agree) / n;
  const double pa = static_cast<double>(a_pos) / n;
  const double pb = static_cast<double>(b_pos) / n;
  const double pe = pa * pb + (1.0 - pa) * (1.0 - pb);
  report.observed_agreement = po;
  report.expected_agreement = pe;
  if (pe < 1.0) {
    report.kappa = (po - pe) / (1.0 - pe);
  } else if (po == 1.0) {
    report.kappa = 1.0;
  }
  return report;
}

namespace {

bool Disagrees(const corpus::LabeledReview& r) {
  return std::any_of(r.labels.begin(), r.labels.end(), [&](const auto& l) {
    return l.label != r.labels.front().label;
  });
}

corpus::FinalLabel ToFinal(Label l) {
  return l == Label::kFairness ? corpus::FinalLabel::kFairness
                               : corpus::FinalLabel::kNonFairness;
}

}  // namespace

std::vector<corpus::LabeledReview> ResolveDisagreements(
    std::vector<corpus::LabeledReview> labels,
    std::span<const Resolution> resolutions) {
  std::map<std::string, size_t> position;
  for (size_t i = 0; i < labels.size(); ++i) {
    corpus::LabeledReview& r = labels[i];
    position[r.review_id] = i;
    std::set<std::string> coders;
    for (const auto& l : r.labels) {
      if (!coders.insert(l.coder_id).second) {
        throw DataError("coder '" + l.coder_id + "' labeled review '" +
                        r.review_id + "' twice");
      }
    }
    if (r.labels.empty()) continue;
    if (!Disagrees(r)) {
      r.final_label = ToFinal(r.labels.front().label);
      continue;
    }
    size_t fairness = 0;
    for (const auto& l : r.labels) fairness += l.label == Label::kFairness;
    const size_t others = r.labels.size() - fairness;
    // Ties keep whatever resolution was recorded earlier.
    if (r.labels.size() >= 3 && fairness != others) {
      r.final_label = ToFinal(fairness > others ? Label::kFairness
                                                : Label::kNonFairness);
    }
  }
  for (const Resolution& res : resolutions) {
    auto it = position.find(res.review_id);
    if (it == position.end() || !Disagrees(labels[it->second])) {
      throw DataError("review '" + res.review_id +
                      "' has no disagreement to resolve");
    }
    labels[it->second].final_label = ToFinal(res.final_label);
  }
  return labels;
}

std::string FormatMetricsTable(
    const std::vector<std::pair<std::string, MetricsReport>>& rows) {
  auto cell = [](const Metric& m) {
    if (!m) return std::string("n/a");
    char buffer[32];
    std::snprintf(buffer, sizeof buffer, "%.2f", *m * 100.0);
    return std::string(buffer);
  };
  std::ostringstream out;
  out << "| Model | P | R | F1 | ACC | AUC |\n";
  out << "|---|---|---|---|---|---|\n";
  for (const auto& [name, m] : rows) {
    out << "| " << name << " | " << cell(m.precision) << " | "
        << cell(m.recall) << " | " << cell(m.f1) << " | " << cell(m.accuracy)
        << " | " << cell(m.auc) << " |\n";
  }
  return out.str();
}

}  // namespace cmine::evaluate

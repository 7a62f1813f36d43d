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

// Report tables: fairness share per category, concern frequency per
// category, owner-response samples, and the combined report export.

#ifndef CMINE_REPORT_H_
#define CMINE_REPORT_H_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cmine/cluster.h"
#include "cmine/common.h"
#include "cmine/corpus.h"
#include "cmine/evaluate.h"
#include "json.hpp"

namespace cmine::report {

// Formats hundredths as "1.76".
std::string FormatHundredths(int64_t hundredths);

struct CategoryRow {
  std::string category;
  int64_t total_reviews = 0;
  int64_t fairness_reviews = 0;
  int64_t percent_hundredths = 0;  // 100 * fairness / total, half-up, 2 dp

  std::string PercentText() const { return FormatHundredths(percent_hundredths); }
};

struct CategoryDistribution {
  std::vector<CategoryRow> rows;  // percentage descending
  CategoryRow overall;

  nlohmann::json ToJson() const;
  static CategoryDistribution FromJson(const nlohmann::json& j);
};

struct CategoryCount {
  std::string category;
  int64_t total_reviews;
  int64_t fairness_reviews;
};

// Builds the table from per-category counts. Rows are ordered by exact
// ratio descending, ties by category name.
CategoryDistribution DistributionFromCounts(std::vector<CategoryCount> counts);

// Every review counts toward its category total; fairness counts come from
// predictions. Throws DataError for a prediction naming an unknown review.
CategoryDistribution ComputeCategoryDistribution(
    const std::map<std::string, Label>& predictions,
    const std::vector<corpus::Review>& reviews);

struct ConcernFrequencyTable {
  std::vector<std::string> concerns;    // columns
  std::vector<std::string> categories;  // rows, name ascending
  std::vector<std::vector<int64_t>> counts;  // [category][concern]
  std::vector<int64_t> totals;               // per concern

  int64_t grand_total() const;
  nlohmann::json ToJson() const;
  static ConcernFrequencyTable FromJson(const nlohmann::json& j);
};

// Counts reviews assigned to compact clusters per (category, concern).
// Clusters merged in the registry share one column; columns are ordered by
// their smallest cluster id. Categories without clustered reviews get an
// all-zero row. Each review is counted once, in its assigned cluster.
ConcernFrequencyTable ComputeConcernFrequency(
    const std::map<std::string, int>& assignments,
    const cluster::TopicRegistry& topics,
    const std::vector<corpus::Review>& reviews);

struct RootCauseSample {
  std::vector<std::pair<std::string, std::string>> responses;
  double confidence = 0.0;
  double margin = 0.0;
  uint64_t seed = 0;
  int64_t population = 0;
  int64_t requested = 0;
  std::optional<std::string> warning;

  nlohmann::json ToJson() const;
  static RootCauseSample FromJson(const nlohmann::json& j);
};

// Draws uniformly without replacement from the reviews that carry a
// non-empty owner response. The sample size uses spec.population when
// set, otherwise the number of responses found; a size beyond what exists
// returns everything with a warning. Output keeps input order.
RootCauseSample SampleOwnerResponses(const std::vector<corpus::Review>& reviews,
                                     const corpus::SampleSpec& spec,
                                     uint64_t seed);

struct TopReview {
  std::string review_id;
  double silhouette = 0.0;
  std::string body;
};

struct ClusterSummary {
  int cluster_id = 0;
  std::string concern;
  int64_t size = 0;
  std::vector<TopReview> top;
};

// Inputs of the combined report, each produced by one pipeline stage.
struct ReportArtifacts {
  // From "eval": labelled rows such as "fold 3" or "best (fold 3)".
  std::optional<std::vector<std::pair<std::string, evaluate::MetricsReport>>>
      evaluation;
  // From "predict".
  std::optional<CategoryDistribution> distribution;
  std::optional<RootCauseSample> owner_sample;
  // From "cluster".
  std::optional<ConcernFrequencyTable> concerns;
  std::optional<std::vector<ClusterSummary>> clusters;
};

enum class ReportFormat { kMarkdown, kJson, kCsv };
ReportFormat ParseReportFormat(std::string_view name);
std::string_view ReportExtension(ReportFormat format);

// Throws DataError naming the stage whose artifact is missing.
std::string RenderReport(const ReportArtifacts& artifacts, ReportFormat format);
nlohmann::json ReportToJson(const ReportArtifacts& artifacts);

}  // namespace cmine::report

#endif  // CMINE_REPORT_H_

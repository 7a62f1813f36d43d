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

#include "cmine/report.h"

#include <algorithm>
#include <cstdio>
#include <set>
#include <sstream>
#include <unordered_map>

namespace cmine::report {

using nlohmann::json;

std::string FormatHundredths(int64_t hundredths) {
  const bool negative = hundredths < 0;
  const int64_t v = negative ? -hundredths : hundredths;
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%s%lld.%02lld", negative ? "-" : "",
                static_cast<long long>(v / 100),
                static_cast<long long>(v % 100));
  return buffer;
}

namespace {

CategoryRow MakeRow(std::string category, int64_t total, int64_t fairness) {
  if (total < 0 || fairness < 0 || fairness > total) {
    throw DataError("category '" + category + "': fairness count " +
                    std::to_string(fairness) + " exceeds total " +
                    std::to_string(total));
  }
  CategoryRow row{std::move(category), total, fairness, 0};
  if (total > 0) row.percent_hundredths = RoundHalfUpRatio(fairness, total, 10000);
  return row;
}

json RowJson(const CategoryRow& row) {
  return {{"category", row.category},
          {"total_reviews", row.total_reviews},
          {"fairness_reviews", row.fairness_reviews},
          {"percent", row.PercentText()}};
}

CategoryRow RowFromJson(const json& j) {
  return MakeRow(j.at("category").get<std::string>(),
                 j.at("total_reviews").get<int64_t>(),
                 j.at("fairness_reviews").get<int64_t>());
}

std::string MetricCell(const evaluate::Metric& m) {
  if (!m) return "n/a";
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.2f", *m * 100.0);
  return buffer;
}

std::string CsvField(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

json CategoryDistribution::ToJson() const {
  json r = json::array();
  for (const CategoryRow& row : rows) r.push_back(RowJson(row));
  return {{"rows", r}, {"overall", RowJson(overall)}};
}

CategoryDistribution CategoryDistribution::FromJson(const json& j) {
  CategoryDistribution d;
  for (const json& r : j.at("rows")) d.rows.push_back(RowFromJson(r));
  d.overall = RowFromJson(j.at("overall"));
  return d;
}

CategoryDistribution DistributionFromCounts(std::vector<CategoryCount> counts) {
  CategoryDistribution d;
  int64_t total = 0, fairness = 0;
  for (CategoryCount& c : counts) {
    d.rows.push_back(MakeRow(std::move(c.category), c.total_reviews,
                             c.fairness_reviews));
    total += c.total_reviews;
    fairness += c.fairness_reviews;
  }
  std::sort(d.rows.begin(), d.rows.end(),
            [](const CategoryRow& a, const CategoryRow& b) {
              // a.f / a.t > b.f / b.t without rounding; empty categories last.
              const __int128 lhs =
                  static_cast<__int128>(a.fairness_reviews) *
                  std::max<int64_t>(b.total_reviews, 1);
              const __int128 rhs =
                  static_cast<__int128>(b.fairness_reviews) *
                  std::max<int64_t>(a.total_reviews, 1);
              if (lhs != rhs) return lhs > rhs;
              return a.category < b.category;
            });
  d.overall = MakeRow("overall", total, fairness);
  return d;
}

CategoryDistribution ComputeCategoryDistribution(
    const std::map<std::string, Label>& predictions,
    const std::vector<corpus::Review>& reviews) {
  std::unordered_map<std::string, const corpus::Review*> by_id;
  std::map<std::string, CategoryCount> counts;
  for (const corpus::Review& r : reviews) {
    by_id.emplace(r.id, &r);
    auto& c = counts.try_emplace(r.category, CategoryCount{r.category, 0, 0})
                  .first->second;
    ++c.total_reviews;
  }
  for (const auto& [id, label] : predictions) {
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw DataError("prediction for unknown review '" + id + "'");
    }
    if (label == Label::kFairness) ++counts[it->second->category].fairness_reviews;
  }
  std::vector<CategoryCount> list;
  for (auto& [name, c] : counts) list.push_back(std::move(c));
  return DistributionFromCounts(std::move(list));
}

int64_t ConcernFrequencyTable::grand_total() const {
  int64_t s = 0;
  for (int64_t t : totals) s += t;
  return s;
}

json ConcernFrequencyTable::ToJson() const {
  json rows = json::array();
  for (size_t i = 0; i < categories.size(); ++i) {
    rows.push_back({{"category", categories[i]}, {"counts", counts[i]}});
  }
  return {{"concerns", concerns}, {"rows", rows}, {"totals", totals}};
}

ConcernFrequencyTable ConcernFrequencyTable::FromJson(const json& j) {
  ConcernFrequencyTable t;
  t.concerns = j.at("concerns").get<std::vector<std::string>>();
  for (const json& r : j.at("rows")) {
    t.categories.push_back(r.at("category").get<std::string>());
    t.counts.push_back(r.at("counts").get<std::vector<int64_t>>());
    if (t.counts.back().size() != t.concerns.size()) {
      throw DataError("concern table row has the wrong number of columns");
    }
  }
  t.totals = j.at("totals").get<std::vector<int64_t>>();
  return t;
}

ConcernFrequencyTable ComputeConcernFrequency(
    const std::map<std::string, int>& assignments,
    const cluster::TopicRegistry& topics,
    const std::vector<corpus::Review>& reviews) {
  // Column per concern name, ordered by smallest member cluster id.
  std::map<std::string, int> first_cluster;
  for (int c : topics.compact_clusters()) {
    first_cluster.try_emplace(topics.ConcernOf(c), c);
  }
  std::vector<std::pair<int, std::string>> order;
  for (const auto& [name, c] : first_cluster) order.emplace_back(c, name);
  std::sort(order.begin(), order.end());
  ConcernFrequencyTable table;
  std::map<std::string, size_t> column;
  for (const auto& [c, name] : order) {
    column[name] = table.concerns.size();
    table.concerns.push_back(name);
  }

  std::set<std::string> category_names;
  std::unordered_map<std::string, const corpus::Review*> by_id;
  for (const corpus::Review& r : reviews) {
    category_names.insert(r.category);
    by_id.emplace(r.id, &r);
  }
  table.categories.assign(category_names.begin(), category_names.end());
  std::map<std::string, size_t> row;
  for (size_t i = 0; i < table.categories.size(); ++i) {
    row[table.categories[i]] = i;
  }
  table.counts.assign(table.categories.size(),
                      std::vector<int64_t>(table.concerns.size(), 0));
  table.totals.assign(table.concerns.size(), 0);
  for (const auto& [id, c] : assignments) {
    if (!topics.IsCompact(c)) continue;
    auto it = by_id.find(id);
    if (it == by_id.end()) {
      throw DataError("cluster assignment for unknown review '" + id + "'");
    }
    const size_t col = column.at(topics.ConcernOf(c));
    ++table.counts[row.at(it->second->category)][col];
    ++table.totals[col];
  }
  return table;
}

json RootCauseSample::ToJson() const {
  json r = json::array();
  for (const auto& [id, text] : responses) {
    r.push_back({{"review_id", id}, {"owner_response", text}});
  }
  json j = {{"confidence", confidence}, {"margin", margin},
            {"seed", seed},             {"population", population},
            {"requested", requested},   {"responses", r}};
  j["warning"] = warning ? json(*warning) : json(nullptr);
  return j;
}

RootCauseSample RootCauseSample::FromJson(const json& j) {
  RootCauseSample s;
  s.confidence = j.at("confidence").get<double>();
  s.margin = j.at("margin").get<double>();
  s.seed = j.at("seed").get<uint64_t>();
  s.population = j.at("population").get<int64_t>();
  s.requested = j.at("requested").get<int64_t>();
  for (const json& r : j.at("responses")) {
    s.responses.emplace_back(r.at("review_id").get<std::string>(),
                             r.at("owner_response").get<std::string>());
  }
  if (j.contains("warning") && !j["warning"].is_null()) {
    s.warning = j["warning"].get<std::string>();
  }
  return s;
}

RootCauseSample SampleOwnerResponses(const std::vector<corpus::Review>& reviews,
                                     const corpus::SampleSpec& spec,
                                     uint64_t seed) {
  std::vector<const corpus::Review*> pool;
  for (const corpus::Review& r : reviews) {
    if (r.owner_response && !r.owner_response->empty()) pool.push_back(&r);
  }
  RootCauseSample sample;
  sample.confidence = spec.confidence();
  sample.margin = spec.margin();
  sample.seed = seed;
  sample.population = static_cast<int64_t>(pool.size());
  if (spec.population()) {
    sample.requested = corpus::SampleSize(spec);
  } else if (sample.population > 0) {
    sample.requested = corpus::SampleSize(spec.WithPopulation(sample.population));
  }
  size_t n = static_cast<size_t>(sample.requested);
  if (n > pool.size()) {
    sample.warning = "sample of " + std::to_string(n) +
                     " requested but only " + std::to_string(pool.size()) +
                     " owner responses exist; returning all of them";
    n = pool.size();
  }
  Rng rng(seed);
  std::vector<size_t> picked = rng.SampleIndices(pool.size(), n);
  std::sort(picked.begin(), picked.end());
  for (size_t i : picked) {
    sample.responses.emplace_back(pool[i]->id, *pool[i]->owner_response);
  }
  return sample;
}

ReportFormat ParseReportFormat(std::string_view name) {
  if (name == "markdown" || name == "md") return ReportFormat::kMarkdown;
  if (name == "json") return ReportFormat::kJson;
  if (name == "csv") return ReportFormat::kCsv;
  throw UsageError("unknown report format '" + std::string(name) +
                   "' (expected markdown, json or csv)");
}

std::string_view ReportExtension(ReportFormat format) {
  switch (format) {
    case ReportFormat::kMarkdown: return "md";
    case ReportFormat::kJson: return "json";
    case ReportFormat::kCsv: return "csv";
  }
  return "txt";
}

namespace {

void RequireComplete(const ReportArtifacts& a) {
  if (!a.evaluation) throw DataError("report needs the output of stage 'eval'");
  if (!a.distribution || !a.owner_sample) {
    throw DataError("report needs the output of stage 'predict'");
  }
  if (!a.concerns || !a.clusters) {
    throw DataError("report needs the output of stage 'cluster'");
  }
}

std::string RenderMarkdown(const ReportArtifacts& a) {
  std::ostringstream out;
  out << "# Fairness concern report\n\n";
  out << "## Classifier evaluation\n\n"
      << evaluate::FormatMetricsTable(*a.evaluation) << "\n";

  out << "## Fairness reviews per category\n\n";
  out << "| Category | All reviews | Fairness reviews | Percentage |\n";
  out << "|---|---|---|---|\n";
  for (const CategoryRow& r : a.distribution->rows) {
    out << "| " << r.category << " | " << r.total_reviews << " | "
        << r.fairness_reviews << " | " << r.PercentText() << "% |\n";
  }
  const CategoryRow& o = a.distribution->overall;
  out << "| **Overall** | " << o.total_reviews << " | " << o.fairness_reviews
      << " | " << o.PercentText() << "% |\n\n";

  const ConcernFrequencyTable& t = *a.concerns;
  out << "## Concern frequency per category\n\n| Category |";
  for (const std::string& c : t.concerns) out << " " << c << " |";
  out << "\n|---|";
  for (size_t i = 0; i < t.concerns.size(); ++i) out << "---|";
  out << "\n";
  for (size_t i = 0; i < t.categories.size(); ++i) {
    out << "| " << t.categories[i] << " |";
    for (int64_t v : t.counts[i]) out << " " << v << " |";
    out << "\n";
  }
  out << "| **Total** |";
  for (int64_t v : t.totals) out << " " << v << " |";
  out << "\n\n## Cluster top reviews\n";
  for (const ClusterSummary& c : *a.clusters) {
    out << "\n### Cluster " << c.cluster_id << ": " << c.concern << " ("
        << c.size << " reviews)\n\n";
    for (const TopReview& r : c.top) {
      char s[32];
      std::snprintf(s, sizeof s, "%.4f", r.silhouette);
      out << "- `" << r.review_id << "` (" << s << ") " << r.body << "\n";
    }
  }

  const RootCauseSample& s = *a.owner_sample;
  out << "\n## Owner responses for root-cause analysis\n\n";
  out << "Sampled " << s.responses.size() << " of " << s.population
      << " responses (confidence " << s.confidence << ", margin " << s.margin
      << ", seed " << s.seed << ").\n";
  if (s.warning) out << "\nWarning: " << *s.warning << "\n";
  out << "\n";
  for (const auto& [id, text] : s.responses) {
    out << "- `" << id << "` " << text << "\n";
  }
  return out.str();
}

std::string RenderCsv(const ReportArtifacts& a) {
  std::ostringstream out;
  out << "section,row,column,value\n";
  auto line = [&](const std::string& section, const std::string& row,
                  const std::string& column, const std::string& value) {
    out << section << ',' << CsvField(row) << ',' << CsvField(column) << ','
        << CsvField(value) << '\n';
  };
  for (const auto& [name, m] : *a.evaluation) {
    line("evaluation", name, "P", MetricCell(m.precision));
    line("evaluation", name, "R", MetricCell(m.recall));
    line("evaluation", name, "F1", MetricCell(m.f1));
    line("evaluation", name, "ACC", MetricCell(m.accuracy));
    line("evaluation", name, "AUC", MetricCell(m.auc));
  }
  auto category = [&](const CategoryRow& r) {
    line("category_distribution", r.category, "total_reviews",
         std::to_string(r.total_reviews));
    line("category_distribution", r.category, "fairness_reviews",
         std::to_string(r.fairness_reviews));
    line("category_distribution", r.category, "percent", r.PercentText());
  };
  for (const CategoryRow& r : a.distribution->rows) category(r);
  category(a.distribution->overall);
  const ConcernFrequencyTable& t = *a.concerns;
  for (size_t i = 0; i < t.categories.size(); ++i) {
    for (size_t j = 0; j < t.concerns.size(); ++j) {
      line("concern_frequency", t.categories[i], t.concerns[j],
           std::to_string(t.counts[i][j]));
    }
  }
  for (size_t j = 0; j < t.concerns.size(); ++j) {
    line("concern_frequency", "Total", t.concerns[j], std::to_string(t.totals[j]));
  }
  for (const ClusterSummary& c : *a.clusters) {
    for (size_t rank = 0; rank < c.top.size(); ++rank) {
      char s[32];
      std::snprintf(s, sizeof s, "%.4f", c.top[rank].silhouette);
      line("top_reviews", "cluster " + std::to_string(c.cluster_id),
           c.concern, c.top[rank].review_id + " " + s);
    }
  }
  for (const auto& [id, text] : a.owner_sample->responses) {
    line("owner_responses", id, "owner_response", text);
  }
  return out.str();
}

}  // namespace

json ReportToJson(const ReportArtifacts& a) {
  RequireComplete(a);
  json evaluation = json::array();
  for (const auto& [name, m] : *a.evaluation) {
    evaluation.push_back({{"name", name},
                          {"P", MetricCell(m.precision)},
                          {"R", MetricCell(m.recall)},
                          {"F1", MetricCell(m.f1)},
                          {"ACC", MetricCell(m.accuracy)},
                          {"AUC", MetricCell(m.auc)},
                          {"metrics", m.ToJson()}});
  }
  json clusters = json::array();
  for (const ClusterSummary& c : *a.clusters) {
    json top = json::array();
    for (const TopReview& r : c.top) {
      top.push_back({{"review_id", r.review_id},
                     {"silhouette", r.silhouette},
                     {"body", r.body}});
    }
    clusters.push_back({{"cluster_id", c.cluster_id},
                        {"concern", c.concern},
                        {"size", c.size},
                        {"top", top}});
  }
  return {{"evaluation", evaluation},
          {"category_distribution", a.distribution->ToJson()},
          {"concern_frequency", a.concerns->ToJson()},
          {"clusters", clusters},
          {"owner_responses", a.owner_sample->ToJson()}};
}

std::string RenderReport(const ReportArtifacts& artifacts, ReportFormat format) {
  RequireComplete(artifacts);
  switch (format) {
    case ReportFormat::kMarkdown: return RenderMarkdown(artifacts);
    case ReportFormat::kJson: return ReportToJson(artifacts).dump(2) + "\n";
    case ReportFormat::kCsv: return RenderCsv(artifacts);
  }
  return {};
}

}  // namespace cmine::report

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

#include "cmine/cluster.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cmine/common.h"

namespace cmine::cluster {

using nlohmann::json;

void PointSet::Add(std::string id, std::span<const double> point) {
  if (ids_.empty() && dimension_ == 0) dimension_ = point.size();
  if (point.size() != dimension_ || dimension_ == 0) {
    throw DataError("point '" + id + "' has dimension " +
                    std::to_string(point.size()) + ", expected " +
                    std::to_string(dimension_));
  }
  for (double v : point) {
    if (!std::isfinite(v)) throw DataError("point '" + id + "' is not finite");
  }
  ids_.push_back(std::move(id));
  values_.insert(values_.end(), point.begin(), point.end());
}

double SquaredDistance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

json ClusterConfig::ToJson() const {
  return {{"k_min", k_min},
          {"k_max", k_max},
          {"restarts", restarts},
          {"max_iterations", max_iterations},
          {"seed", seed}};
}

ClusterConfig ClusterConfig::FromJson(const json& j) {
  ClusterConfig c;
  c.k_min = j.value("k_min", c.k_min);
  c.k_max = j.value("k_max", c.k_max);
  c.restarts = j.value("restarts", c.restarts);
  c.max_iterations = j.value("max_iterations", c.max_iterations);
  c.seed = j.value("seed", c.seed);
  return c;
}

namespace {

// Flat k x d centers.
struct Centers {
  size_t k, d;
  std::vector<double> values;

  std::span<const double> row(size_t c) const {
    return {values.data() + c * d, d};
  }
  std::span<double> row(size_t c) { return {values.data() + c * d, d}; }
};

// Nearest-center assignment (ties: lowest index); returns the inertia.
double Assign(const PointSet& points, const Centers& centers,
              std::vector<int>& assignments, std::vector<double>& costs) {
  const size_t n = points.size();
  assignments.resize(n);
  costs.resize(n);
  double total = 0.0;
  for (size_t i = 0; i < n; ++i) {
    auto p = points.point(i);
    double best = std::numeric_limits<double>::infinity();
    int best_c = 0;
    for (size_t c = 0; c < centers.k; ++c) {
      double dist = SquaredDistance(p, centers.row(c));
      if (dist < best) {
        best = dist;
        best_c = static_cast<int>(c);
      }
    }
    assignments[i] = best_c;
    costs[i] = best;
    total += best;
  }
  return total;
}

void UpdateCenters(const PointSet& points, const std::vector<int>& assignments,
                   const std::vector<double>& costs, Centers& centers) {
  const size_t d = centers.d;
  std::vector<size_t> counts(centers.k, 0);
  std::fill(centers.values.begin(), centers.values.end(), 0.0);
  for (size_t i = 0; i < points.size(); ++i) {
    auto row = centers.row(static_cast<size_t>(assignments[i]));
    auto p = points.point(i);
    for (size_t j = 0; j < d; ++j) row[j] += p[j];
    ++counts[assignments[i]];
  }
  std::vector<size_t> empty;
  for (size_t c = 0; c < centers.k; ++c) {
    if (counts[c] == 0) {
      empty.push_back(c);
      continue;
    }
    for (double& v : centers.row(c)) v /= static_cast<double>(counts[c]);
  }
  if (empty.empty()) return;
  // Farthest points (by current cost) from clusters that can spare one.
  std::vector<size_t> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return costs[a] > costs[b]; });
  size_t next = 0;
  for (size_t c : empty) {
    while (next < order.size() && counts[assignments[order[next]]] <= 1) ++next;
    if (next == order.size()) break;
    size_t donor = order[next++];
    --counts[assignments[donor]];
    auto p = points.point(donor);
    std::copy(p.begin(), p.end(), centers.row(c).begin());
  }
}

}  // namespace

double Inertia(const PointSet& points, std::span<const int> assignments,
               const std::vector<std::vector<double>>& centers) {
  double total = 0.0;
  for (size_t i = 0; i < points.size(); ++i) {
    total += SquaredDistance(points.point(i), centers.at(assignments[i]));
  }
  return total;
}

KMeansResult KMeansFit(const PointSet& points, int k,
                       const ClusterConfig& config) {
  if (k < 1) throw UsageError("k must be positive");
  if (points.size() < static_cast<size_t>(k)) {
    throw DataError("K-means with k=" + std::to_string(k) + " needs at least " +
                    std::to_string(k) + " points, got " +
                    std::to_string(points.size()));
  }
  if (config.restarts < 1) throw UsageError("restarts must be >= 1");
  if (config.max_iterations < 1) throw UsageError("max_iterations must be >= 1");
  const size_t d = points.dimension();
  const uint64_t k_seed = DeriveSeed(config.seed, static_cast<uint64_t>(k));

  KMeansResult best;
  best.model.inertia = std::numeric_limits<double>::infinity();
  std::vector<int> assign, next_assign;
  std::vector<double> costs, next_costs;
  for (int restart = 0; restart < config.restarts; ++restart) {
    Rng rng(DeriveSeed(k_seed, static_cast<uint64_t>(restart)));
    Centers centers{static_cast<size_t>(k), d,
                    std::vector<double>(static_cast<size_t>(k) * d)};
    std::vector<size_t> init = rng.SampleIndices(points.size(), k);
    for (int c = 0; c < k; ++c) {
      auto p = points.point(init[c]);
      std::copy(p.begin(), p.end(), centers.row(c).begin());
    }
    std::vector<double> trace;
    double inertia = Assign(points, centers, assign, costs);
    trace.push_back(inertia);
    int iterations = 0;
    for (int it = 0; it < config.max_iterations; ++it) {
      UpdateCenters(points, assign, costs, centers);
      inertia = Assign(points, centers, next_assign, next_costs);
      trace.push_back(inertia);
      ++iterations;
      const bool fixpoint = next_assign == assign;
      assign.swap(next_assign);
      costs.swap(next_costs);
      if (fixpoint) break;
    }
    if (inertia < best.model.inertia) {
      best.model.k = k;
      best.model.inertia = inertia;
      best.model.iterations_run = iterations;
      best.model.restart_index_of_best = restart;
      best.model.centers.assign(k, std::vector<double>(d));
      for (int c = 0; c < k; ++c) {
        auto row = centers.row(c);
        std::copy(row.begin(), row.end(), best.model.centers[c].begin());
      }
      best.assignments = assign;
    }
    best.inertia_traces.push_back(std::move(trace));
  }
  return best;
}

DistanceMatrix::DistanceMatrix(const PointSet& points)
    : n_(points.size()), values_(points.size() * points.size(), 0.0) {
  for (size_t i = 0; i < n_; ++i) {
    for (size_t j = i + 1; j < n_; ++j) {
      double dist = std::sqrt(SquaredDistance(points.point(i), points.point(j)));
      values_[i * n_ + j] = dist;
      values_[j * n_ + i] = dist;
    }
  }
}

namespace {

template <typename DistanceFn>
SilhouetteReport SilhouetteImpl(size_t n, std::span<const int> assignments,
                                DistanceFn&& distance) {
  if (assignments.size() != n) {
    throw UsageError("assignment count does not match the point count");
  }
  std::vector<int> labels(assignments.begin(), assignments.end());
  std::vector<int> cluster_ids = labels;
  std::sort(cluster_ids.begin(), cluster_ids.end());
  cluster_ids.erase(std::unique(cluster_ids.begin(), cluster_ids.end()),
                    cluster_ids.end());
  if (cluster_ids.size() < 2) {
    throw UsageError("silhouette needs at least two non-empty clusters");
  }
  const size_t m = cluster_ids.size();
  std::vector<size_t> dense(n);
  std::vector<size_t> sizes(m, 0);
  for (size_t i = 0; i < n; ++i) {
    dense[i] = static_cast<size_t>(
        std::lower_bound(cluster_ids.begin(), cluster_ids.end(), labels[i]) -
        cluster_ids.begin());
    ++sizes[dense[i]];
  }
  SilhouetteReport report;
  report.per_point.assign(n, 0.0);
  std::vector<double> sums(m);
  for (size_t i = 0; i < n; ++i) {
    const size_t own = dense[i];
    if (sizes[own] == 1) continue;
    std::fill(sums.begin(), sums.end(), 0.0);
    for (size_t j = 0; j < n; ++j) {
      if (j != i) sums[dense[j]] += distance(i, j);
    }
    const double a = sums[own] / static_cast<double>(sizes[own] - 1);
    double b = std::numeric_limits<double>::infinity();
    for (size_t c = 0; c < m; ++c) {
      if (c != own) b = std::min(b, sums[c] / static_cast<double>(sizes[c]));
    }
    const double denom = std::max(a, b);
    report.per_point[i] = denom > 0.0 ? (b - a) / denom : 0.0;
  }
  double total = 0.0;
  std::vector<double> cluster_sum(m, 0.0);
  for (size_t i = 0; i < n; ++i) {
    total += report.per_point[i];
    cluster_sum[dense[i]] += report.per_point[i];
  }
  report.overall_mean = total / static_cast<double>(n);
  std::vector<size_t> above(m, 0);
  for (size_t i = 0; i < n; ++i) {
    if (report.per_point[i] > report.overall_mean) ++above[dense[i]];
  }
  for (size_t c = 0; c < m; ++c) {
    const int id = cluster_ids[c];
    report.per_cluster_mean[id] = cluster_sum[c] / static_cast<double>(sizes[c]);
    // At least 40% above the mean, in exact integer arithmetic.
    report.compact[id] = above[c] * 5 >= sizes[c] * 2;
  }
  return report;
}

}  // namespace

SilhouetteReport Silhouette(const PointSet& points,
                            std::span<const int> assignments) {
  return SilhouetteImpl(points.size(), assignments, [&](size_t i, size_t j) {
    return std::sqrt(SquaredDistance(points.point(i), points.point(j)));
  });
}

SilhouetteReport Silhouette(const DistanceMatrix& distances,
                            std::span<const int> assignments) {
  return SilhouetteImpl(distances.size(), assignments,
                        [&](size_t i, size_t j) { return distances(i, j); });
}

json SilhouetteReport::ToJson(const PointSet& points) const {
  json per = json::object();
  for (size_t i = 0; i < per_point.size(); ++i) per[points.id(i)] = per_point[i];
  json clusters = json::array();
  for (const auto& [id, mean] : per_cluster_mean) {
    clusters.push_back(
        {{"cluster", id}, {"mean", mean}, {"compact", compact.at(id)}});
  }
  return {{"per_point", per}, {"clusters", clusters},
          {"overall_mean", overall_mean}};
}

double MeanSilhouetteMetric::Score(const PointSet& points,
                                   const KMeansResult& fit) {
  if (cached_for_ != &points || !distances_ ||
      distances_->size() != points.size()) {
    distances_ = std::make_unique<DistanceMatrix>(points);
    cached_for_ = &points;
  }
  return Silhouette(*distances_, fit.assignments).overall_mean;
}

KSelection SelectK(const PointSet& points, const ClusterConfig& config,
                   QualityMetric* metric) {
  if (config.k_min < 2 || config.k_max < config.k_min) {
    throw UsageError("k range must satisfy 2 <= k_min <= k_max");
  }
  MeanSilhouetteMetric default_metric;
  if (metric == nullptr) metric = &default_metric;
  const int k_max =
      std::min<int>(config.k_max, static_cast<int>(points.size()) - 1);
  if (k_max < config.k_min) {
    throw DataError("too few points (" + std::to_string(points.size()) +
                    ") for k_min=" + std::to_string(config.k_min));
  }
  KSelection selection;
  double best = -std::numeric_limits<double>::infinity();
  for (int k = config.k_min; k <= k_max; ++k) {
    KMeansResult fit = KMeansFit(points, k, config);
    const double q = metric->Score(points, fit);
    selection.quality[k] = q;
    if (q > best) {
      best = q;
      selection.k_best = k;
    }
    selection.fits.emplace(k, std::move(fit));
  }
  return selection;
}

CompactSplit FilterCompact(const SilhouetteReport& report) {
  CompactSplit split;
  for (const auto& [id, compact] : report.compact) {
    (compact ? split.kept : split.excluded).push_back(id);
  }
  return split;
}

std::map<int, std::vector<std::string>> TopReviews(
    const PointSet& points, std::span<const int> assignments,
    const SilhouetteReport& report, size_t n) {
  if (n < 1) throw UsageError("top-n must be >= 1");
  std::map<int, std::vector<size_t>> members;
  for (size_t i = 0; i < points.size(); ++i) {
    auto it = report.compact.find(assignments[i]);
    if (it != report.compact.end() && it->second) {
      members[assignments[i]].push_back(i);
    }
  }
  std::map<int, std::vector<std::string>> top;
  for (auto& [cluster, idx] : members) {
    std::sort(idx.begin(), idx.end(), [&](size_t a, size_t b) {
      if (report.per_point[a] != report.per_point[b]) {
        return report.per_point[a] > report.per_point[b];
      }
      return points.id(a) < points.id(b);
    });
    if (idx.size() > n) idx.resize(n);
    auto& out = top[cluster];
    for (size_t i : idx) out.push_back(points.id(i));
  }
  return top;
}

TopicRegistry::TopicRegistry(std::set<int> all_clusters,
                             std::set<int> compact_clusters)
    : all_(std::move(all_clusters)), compact_(std::move(compact_clusters)) {
  for (int c : compact_) {
    if (!all_.contains(c)) throw UsageError("compact cluster not in clustering");
  }
}

void TopicRegistry::CheckAnnotatable(int cluster_id) const {
  if (!all_.contains(cluster_id)) {
    throw UsageError("unknown cluster id " + std::to_string(cluster_id));
  }
  if (!compact_.contains(cluster_id)) {
    throw UsageError("cluster " + std::to_string(cluster_id) +
                     " is excluded (not compact) and cannot be annotated");
  }
}

void TopicRegistry::Name(int cluster_id, const std::string& name,
                         const std::string& coder_id,
                         std::vector<std::string> sample_review_ids) {
  CheckAnnotatable(cluster_id);
  if (name.empty()) throw UsageError("topic name must not be empty");
  TopicEvent event{"name", {cluster_id}, name, ConcernOf(cluster_id), coder_id};
  // Renaming one member of a merge renames the whole merged topic.
  std::vector<int> group = {cluster_id};
  if (auto it = topics_.find(cluster_id);
      it != topics_.end() && !it->second.merged_from.empty()) {
    group = it->second.merged_from;
  }
  for (int c : group) {
    ClusterTopic& t = topics_[c];
    t.cluster_id = c;
    t.topic_name = name;
    t.annotated_by = coder_id;
    if (c == cluster_id && !sample_review_ids.empty()) {
      t.sample_review_ids = sample_review_ids;
    }
  }
  event.clusters = group;
  history_.push_back(std::move(event));
}

void TopicRegistry::Merge(const std::vector<int>& cluster_ids,
                          const std::string& name,
                          const std::string& coder_id) {
  if (cluster_ids.size() < 2) throw UsageError("merge needs at least two clusters");
  if (name.empty()) throw UsageError("topic name must not be empty");
  std::set<int> group;
  for (int c : cluster_ids) {
    CheckAnnotatable(c);
    group.insert(c);
    if (auto it = topics_.find(c); it != topics_.end()) {
      group.insert(it->second.merged_from.begin(), it->second.merged_from.end());
    }
  }
  std::vector<int> members(group.begin(), group.end());
  TopicEvent event{"merge", members, name, "", coder_id};
  for (int c : members) {
    ClusterTopic& t = topics_[c];
    t.cluster_id = c;
    t.topic_name = name;
    t.merged_from = members;
    t.annotated_by = coder_id;
  }
  history_.push_back(std::move(event));
}

std::string TopicRegistry::ConcernOf(int cluster_id) const {
  auto it = topics_.find(cluster_id);
  if (it != topics_.end() && !it->second.topic_name.empty()) {
    return it->second.topic_name;
  }
  return "cluster " + std::to_string(cluster_id);
}

json TopicRegistry::ToJson() const {
  json topics = json::array();
  for (const auto& [id, t] : topics_) {
    topics.push_back({{"cluster_id", t.cluster_id},
                      {"topic_name", t.topic_name},
                      {"merged_from", t.merged_from},
                      {"annotated_by", t.annotated_by},
                      {"sample_review_ids", t.sample_review_ids}});
  }
  json history = json::array();
  for (const TopicEvent& e : history_) {
    history.push_back({{"kind", e.kind},
                       {"clusters", e.clusters},
                       {"name", e.name},
                       {"previous_name", e.previous_name},
                       {"coder_id", e.coder_id}});
  }
  return {{"clusters", all_},
          {"compact", compact_},
          {"topics", topics},
          {"history", history}};
}

TopicRegistry TopicRegistry::FromJson(const json& j) {
  try {
    TopicRegistry r(j.at("clusters").get<std::set<int>>(),
                    j.at("compact").get<std::set<int>>());
    for (const json& t : j.at("topics")) {
      ClusterTopic topic;
      topic.cluster_id = t.at("cluster_id").get<int>();
      topic.topic_name = t.at("topic_name").get<std::string>();
      topic.merged_from = t.at("merged_from").get<std::vector<int>>();
      topic.annotated_by = t.value("annotated_by", std::string());
      topic.sample_review_ids =
          t.value("sample_review_ids", std::vector<std::string>{});
      r.topics_[topic.cluster_id] = std::move(topic);
    }
    for (const json& e : j.value("history", json::array())) {
      r.history_.push_back({e.at("kind").get<std::string>(),
                            e.at("clusters").get<std::vector<int>>(),
                            e.at("name").get<std::string>(),
                            e.value("previous_name", std::string()),
                            e.value("coder_id", std::string())});
    }
    return r;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed topic registry: ") + e.what());
  }
}

}  // namespace cmine::cluster

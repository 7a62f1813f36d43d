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

// Multi-restart K-means, silhouette scoring, k selection, compact-cluster
// filtering, top-review extraction and the topic registry used to name and
// merge clusters.

#ifndef CMINE_CLUSTER_H_
#define CMINE_CLUSTER_H_

#include <cstdint>
#include <map>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

namespace cmine::cluster {

// Row-major n x d matrix of points with one id per row.
class PointSet {
 public:
  PointSet() = default;
  explicit PointSet(size_t dimension) : dimension_(dimension) {}

  void Add(std::string id, std::span<const double> point);
  template <typename T>
  void AddAs(std::string id, std::span<const T> point) {
    std::vector<double> p(point.begin(), point.end());
    Add(std::move(id), p);
  }

  size_t size() const { return ids_.size(); }
  size_t dimension() const { return dimension_; }
  const std::string& id(size_t i) const { return ids_[i]; }
  const std::vector<std::string>& ids() const { return ids_; }
  std::span<const double> point(size_t i) const {
    return {values_.data() + i * dimension_, dimension_};
  }

 private:
  size_t dimension_ = 0;
  std::vector<std::string> ids_;
  std::vector<double> values_;
};

double SquaredDistance(std::span<const double> a, std::span<const double> b);

struct ClusterConfig {
  int k_min = 2;
  int k_max = 10;
  int restarts = 100;
  int max_iterations = 100;
  uint64_t seed = 0;

  nlohmann::json ToJson() const;
  static ClusterConfig FromJson(const nlohmann::json& j);
};

struct KMeansModel {
  int k = 0;
  std::vector<std::vector<double>> centers;
  double inertia = 0.0;
  int iterations_run = 0;
  int restart_index_of_best = 0;
};

struct KMeansResult {
  KMeansModel model;
  std::vector<int> assignments;
  // Inertia after every assignment step, per restart.
  std::vector<std::vector<double>> inertia_traces;
};

// Best of config.restarts Lloyd runs by inertia. Each restart starts from
// k distinct data points drawn uniformly; empty clusters are re-seeded with
// the point farthest from its center.
KMeansResult KMeansFit(const PointSet& points, int k,
                       const ClusterConfig& config);

// Sum of squared distances to the assigned centers.
double Inertia(const PointSet& points, std::span<const int> assignments,
               const std::vector<std::vector<double>>& centers);

// Symmetric Euclidean distance matrix.
class DistanceMatrix {
 public:
  explicit DistanceMatrix(const PointSet& points);
  size_t size() const { return n_; }
  double operator()(size_t i, size_t j) const {
    return values_[i * n_ + j];
  }

 private:
  size_t n_;
  std::vector<double> values_;
};

struct SilhouetteReport {
  std::vector<double> per_point;  // aligned with the point set
  std::map<int, double> per_cluster_mean;
  double overall_mean = 0.0;
  std::map<int, bool> compact;

  nlohmann::json ToJson(const PointSet& points) const;
};

// s(i) = (b - a) / max(a, b); singleton clusters score 0. Compact iff at
// least 40% of a cluster's points score above the overall mean. Throws
// UsageError with fewer than two non-empty clusters.
SilhouetteReport Silhouette(const PointSet& points,
                            std::span<const int> assignments);
SilhouetteReport Silhouette(const DistanceMatrix& distances,
                            std::span<const int> assignments);

class QualityMetric {
 public:
  virtual ~QualityMetric() = default;
  virtual double Score(const PointSet& points, const KMeansResult& fit) = 0;
};

// Mean silhouette; caches the pairwise distance matrix across calls on the
// same point set.
class MeanSilhouetteMetric : public QualityMetric {
 public:
  double Score(const PointSet& points, const KMeansResult& fit) override;

 private:
  const PointSet* cached_for_ = nullptr;
  std::unique_ptr<DistanceMatrix> distances_;
};

struct KSelection {
  int k_best = 0;
  std::map<int, double> quality;
  std::map<int, KMeansResult> fits;
};

// Fits every k in [k_min, k_max] (capped at the number of points) and
// returns the argmax of the metric; ties go to the smaller k.
KSelection SelectK(const PointSet& points, const ClusterConfig& config,
                   QualityMetric* metric = nullptr);

struct CompactSplit {
  std::vector<int> kept;
  std::vector<int> excluded;
};

// Excluded iff more than 60% of the cluster scores at or below the mean.
CompactSplit FilterCompact(const SilhouetteReport& report);

// Per compact cluster: ids by silhouette descending (ties: id ascending),
// truncated to n.
std::map<int, std::vector<std::string>> TopReviews(
    const PointSet& points, std::span<const int> assignments,
    const SilhouetteReport& report, size_t n = 30);

struct ClusterTopic {
  int cluster_id = 0;
  std::string topic_name;
  std::vector<int> merged_from;
  std::string annotated_by;
  std::vector<std::string> sample_review_ids;
};

struct TopicEvent {
  std::string kind;  // "name" or "merge"
  std::vector<int> clusters;
  std::string name;
  std::string previous_name;
  std::string coder_id;
};

// Human topic annotations over the compact clusters of one clustering.
class TopicRegistry {
 public:
  TopicRegistry() = default;
  TopicRegistry(std::set<int> all_clusters, std::set<int> compact_clusters);

  // Throws UsageError for an unknown or excluded cluster id.
  void Name(int cluster_id, const std::string& name,
            const std::string& coder_id,
            std::vector<std::string> sample_review_ids = {});
  void Merge(const std::vector<int>& cluster_ids, const std::string& name,
             const std::string& coder_id = "");

  // Topic name shown downstream: the annotation, or "cluster <id>".
  std::string ConcernOf(int cluster_id) const;
  const std::map<int, ClusterTopic>& topics() const { return topics_; }
  const std::vector<TopicEvent>& history() const { return history_; }
  const std::set<int>& compact_clusters() const { return compact_; }
  bool IsCompact(int cluster_id) const { return compact_.contains(cluster_id); }

  nlohmann::json ToJson() const;
  static TopicRegistry FromJson(const nlohmann::json& j);

 private:
  void CheckAnnotatable(int cluster_id) const;

  std::set<int> all_;
  std::set<int> compact_;
  std::map<int, ClusterTopic> topics_;
  std::vector<TopicEvent> history_;
};

}  // namespace cmine::cluster

#endif  // CMINE_CLUSTER_H_

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

#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "cmine/cluster.h"
#include "cmine/common.h"
#include "doctest.h"
#include "oracles.h"

namespace cmine::cluster {
namespace {

PointSet Points(const std::vector<std::vector<double>>& rows) {
  PointSet p(rows.empty() ? 0 : rows[0].size());
  for (size_t i = 0; i < rows.size(); ++i) {
    char id[16];
    std::snprintf(id, sizeof id, "p%03zu", i);
    p.Add(id, rows[i]);
  }
  return p;
}

std::vector<std::vector<double>> Blobs(Rng& rng, int blobs, int per_blob,
                                       double spread, size_t dim = 2) {
  std::vector<std::vector<double>> rows;
  for (int b = 0; b < blobs; ++b) {
    std::vector<double> center(dim);
    for (size_t d = 0; d < dim; ++d) center[d] = 20.0 * rng.UniformDouble();
    center[0] += 30.0 * b;
    for (int i = 0; i < per_blob; ++i) {
      std::vector<double> p(center);
      for (double& x : p) x += spread * rng.Normal();
      rows.push_back(p);
    }
  }
  return rows;
}

ClusterConfig Config(int restarts, uint64_t seed) {
  ClusterConfig c;
  c.restarts = restarts;
  c.seed = seed;
  return c;
}

TEST_CASE("point set validation") {
  PointSet p(2);
  const double ok[2] = {1, 2};
  p.Add("a", ok);
  const double wrong[3] = {1, 2, 3};
  CHECK_THROWS(p.Add("b", wrong));
  const double nan[2] = {std::nan(""), 0};
  CHECK_THROWS(p.Add("c", nan));
}

TEST_CASE("k-means fixtures") {
  KMeansResult exact = KMeansFit(Points({{0}, {0}, {10}, {10}}), 2, Config(10, 1));
  CHECK(exact.model.inertia == 0.0);
  std::set<double> centers = {exact.model.centers[0][0], exact.model.centers[1][0]};
  CHECK(centers == std::set<double>{0.0, 10.0});

  KMeansResult split = KMeansFit(Points({{0}, {1}, {9}, {10}}), 2, Config(20, 2));
  CHECK(split.model.inertia == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(split.assignments[0] == split.assignments[1]);
  CHECK(split.assignments[2] == split.assignments[3]);
  CHECK(split.assignments[0] != split.assignments[2]);

  CHECK_THROWS_AS(KMeansFit(Points({{0}, {1}}), 3, Config(1, 1)), DataError);
}

TEST_CASE("more restarts never do worse") {
  Rng rng(3);
  for (int trial = 0; trial < 20; ++trial) {
    PointSet p = Points(Blobs(rng, 4, 15, 6.0));
    for (int k = 2; k <= 6; ++k) {
      const double one = KMeansFit(p, k, Config(1, trial)).model.inertia;
      const double many = KMeansFit(p, k, Config(100, trial)).model.inertia;
      CHECK(many <= one);
    }
  }
}

TEST_CASE("lloyd traces are monotone and inertia recomputes") {
  Rng rng(4);
  for (int trial = 0; trial < 30; ++trial) {
    PointSet p = Points(Blobs(rng, 3, 20, 8.0, 3));
    const int k = 2 + static_cast<int>(rng.UniformIndex(5));
    KMeansResult r = KMeansFit(p, k, Config(10, trial));
    CHECK(r.inertia_traces.size() == 10);
    for (const auto& trace : r.inertia_traces) {
      for (size_t i = 1; i < trace.size(); ++i) CHECK(trace[i] <= trace[i - 1]);
    }
    const double direct = Inertia(p, r.assignments, r.model.centers);
    CHECK(std::fabs(direct - r.model.inertia) <= 1e-9 * std::max(1.0, direct));
    for (const auto& c : r.model.centers) {
      for (double x : c) CHECK(std::isfinite(x));
    }
  }
}

TEST_CASE("two-means finds the brute-force optimum on small 1-D sets") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> x;
    std::vector<std::vector<double>> rows;
    for (int i = 0; i < 12; ++i) {
      x.push_back(std::round(100 * rng.Normal()) / 10.0);
      rows.push_back({x.back()});
    }
    oracle::TwoSplit best = oracle::BruteForceTwoMeans(x);
    KMeansResult r = KMeansFit(Points(rows), 2, Config(50, trial));
    CHECK(r.model.inertia == doctest::Approx(best.inertia).epsilon(1e-9));
  }
}

TEST_CASE("silhouette fixtures") {
  PointSet pairs = Points({{0, 0}, {0, 1}, {10, 0}, {10, 1}});
  std::vector<int> labels = {0, 0, 1, 1};
  SilhouetteReport r = Silhouette(pairs, labels);
  const double b = (10.0 + std::sqrt(101.0)) / 2.0;
  CHECK(r.per_point[0] == doctest::Approx(1.0 - 1.0 / b).epsilon(1e-12));
  CHECK(std::fabs(r.per_point[0] - 0.9002) <= 1e-4);
  // Every point ties the mean, so none is strictly above it.
  CHECK_FALSE(r.compact.at(0));
  CHECK_FALSE(r.compact.at(1));

  // a = b: equally spaced points split down the middle.
  PointSet line = Points({{0}, {1}, {2}});
  std::vector<int> mid = {0, 0, 1};
  SilhouetteReport eq = Silhouette(line, mid);
  CHECK(eq.per_point[1] == doctest::Approx(0.0));
  CHECK(eq.per_point[2] == 0.0);  // singleton

  std::vector<int> one = {0, 0, 0};
  CHECK_THROWS_AS(Silhouette(line, one), UsageError);
}

TEST_CASE("silhouette matches the naive implementation") {
  Rng rng(6);
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 3 + static_cast<int>(rng.UniformIndex(120));
    std::vector<std::vector<double>> rows;
    std::vector<int> labels;
    const int k = 2 + static_cast<int>(rng.UniformIndex(5));
    for (int i = 0; i < n; ++i) {
      rows.push_back({rng.Normal(), rng.Normal(), rng.Normal()});
      labels.push_back(i < k ? i : static_cast<int>(rng.UniformIndex(k)));
    }
    if (n < k) continue;
    SilhouetteReport r = Silhouette(Points(rows), labels);
    std::vector<double> expected = oracle::NaiveSilhouette(rows, labels);
    double mean = 0.0;
    for (int i = 0; i < n; ++i) {
      CHECK(std::fabs(r.per_point[i] - expected[i]) <= 1e-12);
      CHECK(r.per_point[i] >= -1.0);
      CHECK(r.per_point[i] <= 1.0);
      mean += expected[i];
    }
    mean /= n;
    CHECK(std::fabs(r.overall_mean - mean) <= 1e-12);
    // Compact iff at least 40% of the cluster scores above the mean.
    std::map<int, int> size, above;
    for (int i = 0; i < n; ++i) {
      size[labels[i]]++;
      if (r.per_point[i] > r.overall_mean) above[labels[i]]++;
    }
    for (const auto& [c, count] : size) {
      CHECK(r.compact.at(c) == (above[c] * 5 >= count * 2));
    }
  }
}

TEST_CASE("select k on separated blobs") {
  Rng rng(7);
  PointSet p = Points(Blobs(rng, 3, 30, 1.0));
  ClusterConfig c = Config(20, 9);
  c.k_min = 2;
  c.k_max = 6;
  KSelection s = SelectK(p, c);
  CHECK(s.k_best == 3);
  CHECK(s.quality.size() == 5);
  c.k_max = 2;
  CHECK(SelectK(p, c).k_best == 2);

  class Flat : public QualityMetric {
   public:
    double Score(const PointSet&, const KMeansResult&) override { return 0.25; }
  } flat;
  c.k_max = 5;
  CHECK(SelectK(p, c, &flat).k_best == 2);
}

TEST_CASE("clustering is deterministic per seed") {
  Rng rng(8);
  PointSet p = Points(Blobs(rng, 3, 25, 5.0));
  ClusterConfig c = Config(30, 4);
  c.k_max = 5;
  KSelection a = SelectK(p, c), b = SelectK(p, c);
  CHECK(a.k_best == b.k_best);
  CHECK(a.quality == b.quality);
  CHECK(a.fits.at(a.k_best).assignments == b.fits.at(b.k_best).assignments);
}

TEST_CASE("compact filtering") {
  SilhouetteReport r;
  r.compact = {{0, false}, {1, true}, {2, true}};
  CompactSplit s = FilterCompact(r);
  CHECK(s.kept == std::vector<int>{1, 2});
  CHECK(s.excluded == std::vector<int>{0});
  r.compact = {{0, true}, {1, true}};
  CHECK(FilterCompact(r).excluded.empty());
}

TEST_CASE("compact boundary on a constructed clustering") {
  // Cluster 0: two tight points far out plus three loose ones near cluster 1,
  // so exactly 2 of its 5 points (40%) score above the overall mean.
  std::vector<std::vector<double>> rows = {{0}, {0.1}, {6}, {6.2}, {6.4},
                                           {10}, {10.1}, {10.2}, {10.3}};
  std::vector<int> labels = {0, 0, 0, 0, 0, 1, 1, 1, 1};
  SilhouetteReport r = Silhouette(Points(rows), labels);
  int above = 0;
  for (int i = 0; i < 5; ++i) above += r.per_point[i] > r.overall_mean;
  CHECK((above * 5 >= 5 * 2) == r.compact.at(0));
}

TEST_CASE("top reviews order and truncation") {
  PointSet p = Points({{0}, {0.5}, {1}, {0.5}, {1.5}, {50}, {51}});
  std::vector<int> labels = {0, 0, 0, 0, 0, 1, 1};
  SilhouetteReport r = Silhouette(p, labels);
  auto top = TopReviews(p, labels, r, 30);
  REQUIRE(top.contains(0));
  CHECK(top.at(0).size() == 5);
  for (size_t i = 1; i < top.at(0).size(); ++i) {
    auto idx = [&](const std::string& id) { return std::stoi(id.substr(1)); };
    const double prev = r.per_point[idx(top.at(0)[i - 1])];
    const double cur = r.per_point[idx(top.at(0)[i])];
    CHECK(prev >= cur);
    if (prev == cur) CHECK(top.at(0)[i - 1] < top.at(0)[i]);
  }
  // p001 and p003 are the same point, so they tie and sort by id.
  auto pos = [&](const std::string& id) {
    return std::find(top.at(0).begin(), top.at(0).end(), id) - top.at(0).begin();
  };
  CHECK(pos("p001") < pos("p003"));
  CHECK(TopReviews(p, labels, r, 2).at(0).size() == 2);

  Rng rng(9);
  PointSet eight = Points(Blobs(rng, 8, 40, 0.5));
  std::vector<int> eight_labels;
  for (int b = 0; b < 8; ++b) {
    for (int i = 0; i < 40; ++i) eight_labels.push_back(b);
  }
  SilhouetteReport er = Silhouette(eight, eight_labels);
  size_t total = 0;
  for (const auto& [c, ids] : TopReviews(eight, eight_labels, er, 30)) {
    total += ids.size();
  }
  CHECK(total <= 240);
}

TEST_CASE("topic registry naming and merging") {
  TopicRegistry reg({0, 1, 2, 3, 7}, {2, 3, 7});
  reg.Name(3, "platform disparity", "coder-a");
  CHECK(reg.ConcernOf(3) == "platform disparity");
  CHECK(reg.ConcernOf(2) == "cluster 2");
  reg.Name(3, "device disparity", "coder-b");
  CHECK(reg.ConcernOf(3) == "device disparity");
  REQUIRE(reg.history().size() == 2);
  CHECK(reg.history()[1].previous_name == "platform disparity");

  reg.Merge({3, 7}, "platform disparity", "coder-a");
  CHECK(reg.ConcernOf(3) == "platform disparity");
  CHECK(reg.ConcernOf(7) == "platform disparity");
  CHECK(reg.topics().at(7).merged_from == std::vector<int>{3, 7});
  // Renaming one member renames the group.
  reg.Name(7, "platform gap", "coder-a");
  CHECK(reg.ConcernOf(3) == "platform gap");

  CHECK_THROWS_AS(reg.Name(0, "x", "c"), UsageError);
  CHECK_THROWS_AS(reg.Name(42, "x", "c"), UsageError);
  CHECK_THROWS_AS(reg.Merge({2, 0}, "x", "c"), UsageError);

  TopicRegistry back = TopicRegistry::FromJson(reg.ToJson());
  CHECK(back.ToJson() == reg.ToJson());
}

}  // namespace
}  // namespace cmine::cluster

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

// Shared test helpers: scratch directories and reference table fixtures.

#ifndef CMINE_TESTS_SUPPORT_H_
#define CMINE_TESTS_SUPPORT_H_

#include <unistd.h>

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "cmine/common.h"
#include "cmine/corpus.h"
#include "cmine/features.h"

namespace cmine::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("cmine-test-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const {
    return path_ / name;
  }

 private:
  std::filesystem::path path_;
};

inline void WriteText(const std::filesystem::path& path,
                      const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

inline std::string ReadText(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

inline corpus::Review MakeReview(std::string id, std::string body,
                                 std::string category = "tools",
                                 std::string app = "app") {
  corpus::Review r;
  r.id = std::move(id);
  r.app_id = std::move(app);
  r.category = std::move(category);
  r.raw_body = body;
  r.body = std::move(body);
  return r;
}

// Per-category review counts and printed percentages from the reference
// fairness-share table. The three rows marked inconsistent do not follow
// from their counts under any single rounding rule.
struct CategoryFixtureRow {
  const char* category;
  int64_t total;
  int64_t fairness;
  const char* printed;
  bool consistent;
};

inline const std::vector<CategoryFixtureRow>& CategoryFixture() {
  static const std::vector<CategoryFixtureRow> rows = {
      {"Communication", 1610525, 28304, "1.76", true},
      {"Social", 1435621, 23602, "1.64", true},
      {"Entertainment", 214384, 3118, "1.45", true},
      {"Arcade", 33066, 364, "1.10", true},
      {"Role Playing", 135610, 1373, "1.01", true},
      {"Video Players & Editors", 1008512, 9583, "0.95", true},
      {"Music & Audio", 554215, 4766, "0.86", true},
      {"Travel & Local", 177341, 1384, "0.78", true},
      {"Tools", 937639, 6823, "0.73", true},
      {"Health & Fitness", 152649, 898, "0.59", true},
      {"Food & Drink", 192842, 10087, "0.56", false},
      {"Art & Design", 47715, 249, "0.52", true},
      {"Education", 47464, 214, "0.45", true},
      {"Productivity", 906605, 3645, "0.40", true},
      {"Finance", 84209, 332, "0.39", true},
      {"Strategy", 51970, 203, "0.39", true},
      {"Photography", 1095201, 3888, "0.35", false},
      {"Lifestyle", 82604, 282, "0.34", true},
      {"Shopping", 505533, 1547, "0.31", true},
      {"Puzzle", 11310, 26, "0.23", true},
      {"Business", 160373, 258, "0.16", true},
      {"Personalization", 19390, 19, "0.09", false},
      {"Auto & Vehicles", 10727, 9, "0.08", true},
  };
  return rows;
}

// Reference per-category concern counts (six concern columns).
struct ConcernFixtureRow {
  const char* category;
  int64_t counts[6];
};

inline const std::vector<ConcernFixtureRow>& ConcernFixture() {
  static const std::vector<ConcernFixtureRow> rows = {
      {"Photography", {492, 63, 84, 571, 95, 442}},
      {"Productivity", {417, 286, 28, 334, 93, 304}},
      {"Communication", {11942, 716, 576, 2097, 550, 362}},
      {"Shopping", {27, 146, 60, 308, 112, 302}},
      {"Tools", {1247, 1222, 107, 500, 862, 121}},
      {"Social", {2969, 1794, 5706, 3922, 3904, 382}},
      {"Video Players & Editors", {182, 313, 3656, 572, 1880, 1555}},
      {"Travel & Local", {35, 82, 60, 229, 197, 240}},
      {"Entertainment", {250, 89, 20, 239, 115, 158}},
      {"Finance", {8, 1, 2, 29, 8, 139}},
      {"Business", {5, 11, 1, 45, 9, 49}},
      {"Music & Audio", {210, 86, 33, 364, 788, 1889}},
      {"Health & Fitness", {22, 12, 9, 165, 88, 283}},
      {"Food & Drink", {217, 6, 1, 150, 51, 123}},
      {"Lifestyle", {21, 10, 1, 37, 2, 47}},
      {"Role Playing", {4, 6, 17, 20, 15, 607}},
      {"Arcade", {0, 2, 2, 32, 2, 175}},
      {"Education", {18, 1, 0, 26, 1, 101}},
      {"Strategy", {3, 3, 3, 11, 2, 107}},
      {"Art & Design", {15, 1, 1, 61, 0, 28}},
      {"Auto & Vehicles", {0, 0, 1, 1, 0, 1}},
      {"Puzzle", {1, 0, 0, 0, 0, 2}},
      {"Personalization", {5, 0, 0, 2, 0, 1}},
  };
  return rows;
}

inline constexpr int64_t kConcernTotals[6] = {18090, 4850, 10368,
                                              9715,  8774, 7418};

// Feature vector with only a dense part.
inline features::FeatureVector DenseVector(std::vector<double> values) {
  features::FeatureVector v;
  v.dense = std::move(values);
  return v;
}

}  // namespace cmine::testing

#endif  // CMINE_TESTS_SUPPORT_H_

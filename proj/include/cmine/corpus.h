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

// Review ingestion, text normalization, language/length filtering and
// statistical sampling for labeling campaigns.

#ifndef CMINE_CORPUS_H_
#define CMINE_CORPUS_H_

#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "cmine/common.h"

namespace cmine::corpus {

struct Review {
  std::string id;
  std::string app_id;
  std::string category;
  std::string body;
  std::optional<int> rating;
  std::optional<std::string> owner_response;
  std::string raw_body;
};

struct CoderLabel {
  std::string coder_id;
  Label label;
};

enum class FinalLabel { kNonFairness, kFairness, kUnresolved };

std::string_view FinalLabelName(FinalLabel label);
// Accepts "fairness", "non_fairness" and "unresolved".
FinalLabel ParseFinalLabel(std::string_view name);

struct LabeledReview {
  std::string review_id;
  std::vector<CoderLabel> labels;
  FinalLabel final_label = FinalLabel::kUnresolved;
};

// One JSON object per line:
//   {"review_id": ..., "labels": [{"coder_id": ..., "label": ...}],
//    "final_label": ...}
std::vector<LabeledReview> ParseLabelsJsonl(std::string_view content);
std::vector<LabeledReview> LoadLabels(const std::filesystem::path& path);
std::string LabelsToJsonl(const std::vector<LabeledReview>& labels);

enum class InputFormat { kJsonl, kCsv };

// Reads reviews from JSONL or CSV (comma, double-quote quoting, header row).
// Required keys/columns: id, app_id, category, body. Optional: rating,
// owner_response. Errors name the 1-based row (line) and the field.
std::vector<Review> IngestReviews(const std::filesystem::path& path,
                                  InputFormat format);
std::vector<Review> ParseJsonl(std::string_view content);
std::vector<Review> ParseCsv(std::string_view content);

// One JSON object per line with both raw_body and body.
std::string ToJsonl(const std::vector<Review>& reviews);
void WriteJsonl(const std::filesystem::path& path,
                const std::vector<Review>& reviews);

// Removes emoji, decimal digits, punctuation/symbols (currency symbols
// excepted) and one-character tokens; collapses whitespace. Case is kept.
std::string CleanText(std::string_view raw);

// Applies CleanText to every review body (raw_body is untouched).
void CleanAll(std::vector<Review>& reviews);

// The bundled list of 50 English function words, lowercase.
const std::unordered_set<std::string>& StopWords();
bool IsStopWord(std::string_view lowercase_token);

class LanguageDetector {
 public:
  virtual ~LanguageDetector() = default;
  virtual bool IsEnglish(std::string_view cleaned_text) const = 0;
};

// Passes iff >= 80% of non-space code points are basic Latin and at least
// one lowercased token is an English function word.
class FunctionWordDetector : public LanguageDetector {
 public:
  bool IsEnglish(std::string_view cleaned_text) const override;
};

enum class DropReason { kTooShort, kNonEnglish };
std::string_view DropReasonName(DropReason reason);

struct Dropped {
  std::string id;
  DropReason reason;
};

struct FilterResult {
  std::vector<Review> kept;
  std::vector<Dropped> dropped;
};

// Word counts are taken on the cleaned body (CleanText(raw_body)).
FilterResult FilterReviews(const std::vector<Review>& reviews,
                           int min_words = 4,
                           const LanguageDetector* detector = nullptr);

class SampleSpec {
 public:
  // confidence must be one of 0.90, 0.95, 0.99; margin in (0, 1);
  // population nullopt means unbounded.
  SampleSpec(double confidence, double margin,
             std::optional<int64_t> population = std::nullopt);

  double confidence() const { return confidence_; }
  double margin() const { return margin_; }
  std::optional<int64_t> population() const { return population_; }
  double z_value() const { return z_value_; }

  SampleSpec WithPopulation(std::optional<int64_t> population) const {
    return SampleSpec(confidence_, margin_, population);
  }

 private:
  double confidence_;
  double margin_;
  std::optional<int64_t> population_;
  double z_value_;
};

// z-value for a supported confidence level; throws UsageError otherwise.
double ZValue(double confidence);

// Cochran's estimate for p = 0.5 with finite-population correction.
int64_t SampleSize(const SampleSpec& spec);

// Uniform sample without replacement, returned in input order. With
// per_app_cap, each app first contributes a seeded random subset of at most
// cap reviews and n is drawn from that pool.
std::vector<Review> DrawSample(const std::vector<Review>& reviews, size_t n,
                               uint64_t seed,
                               std::optional<size_t> per_app_cap = {});

}  // namespace cmine::corpus

#endif  // CMINE_CORPUS_H_

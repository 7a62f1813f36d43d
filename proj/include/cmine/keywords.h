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

// Concern keyword bootstrapping: token-boundary matching, embedding-ranked
// candidate extraction with diversity filtering, and rarity/subsumption
// pruning.

#ifndef CMINE_KEYWORDS_H_
#define CMINE_KEYWORDS_H_

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "cmine/corpus.h"
#include "cmine/features.h"
#include "json.hpp"

namespace cmine::keywords {

enum class Origin { kSeed, kExtracted, kManual };
std::string_view OriginName(Origin origin);
Origin ParseOrigin(std::string_view name);

struct Keyword {
  std::string phrase;  // lowercase, 1-3 space-separated tokens
  Origin origin = Origin::kSeed;
  int64_t match_count = 0;
};

class KeywordSet {
 public:
  KeywordSet() = default;
  static KeywordSet FromSeeds(const std::vector<std::string>& seeds);

  // Lowercases and normalizes whitespace; rejects empty, >3-token and
  // duplicate phrases. Returns false for a duplicate.
  bool Add(std::string phrase, Origin origin);
  bool Remove(const std::string& phrase);
  bool Contains(const std::string& phrase) const;

  const std::vector<Keyword>& keywords() const { return keywords_; }
  std::vector<Keyword>& mutable_keywords() { return keywords_; }
  size_t size() const { return keywords_.size(); }
  bool empty() const { return keywords_.empty(); }

  // [{phrase, origin, match_count}]
  nlohmann::json ToJson() const;
  static KeywordSet FromJson(const nlohmann::json& j);

 private:
  std::vector<Keyword> keywords_;
};

struct Match {
  std::string review_id;
  std::vector<std::string> keywords;
};

// Lowercase whitespace tokens of a (cleaned) body.
std::vector<std::string> Tokenize(std::string_view body);

// True iff the phrase tokens appear contiguously in tokens.
bool ContainsPhrase(const std::vector<std::string>& tokens,
                    const std::vector<std::string>& phrase_tokens);

// Reviews with at least one match, in input order; keywords listed in set
// order. Updates match_count on the set.
std::vector<Match> MatchKeywords(const std::vector<corpus::Review>& reviews,
                                 KeywordSet& keyword_set);

// keyword -> ids of matching reviews.
using MatchIndex = std::map<std::string, std::set<std::string>>;
MatchIndex BuildMatchIndex(const std::vector<corpus::Review>& reviews,
                           const std::vector<std::string>& phrases);

struct KeywordCandidate {
  std::string phrase;
  double relevance = 0.0;
  int64_t document_frequency = 0;
};

struct ExtractConfig {
  int min_ngram = 1;
  int max_ngram = 3;
  double seed_weight = 0.7;           // lambda
  double diversity_threshold = 0.95;  // delta
  size_t top_n = 200;
};

// Candidate phrases from the reviews, scored by
//   lambda * cos(v, seed centroid) + (1 - lambda) * cos(v, corpus centroid)
// with v the mean word vector of the phrase, sorted by relevance and
// greedily diversified. document_frequency counts the given reviews.
std::vector<KeywordCandidate> ExtractCandidates(
    const std::vector<corpus::Review>& reviews,
    const features::WordVectorTable& word_vectors,
    const std::vector<std::string>& seeds, const ExtractConfig& config = {});

// Keeps candidates with df >= ceil(min_fraction * corpus_size) (at least 1).
int64_t RarityThreshold(int64_t corpus_size, double min_fraction);
std::vector<KeywordCandidate> PruneRare(
    const std::vector<KeywordCandidate>& candidates, int64_t corpus_size,
    double min_fraction = 0.00001);

// Drops keywords whose match set is contained in another retained
// keyword's set (equal sets keep the shorter, then lexicographically first
// phrase), then n-grams containing a retained unigram.
std::vector<KeywordCandidate> PruneSubsumed(
    const std::vector<KeywordCandidate>& candidates,
    const MatchIndex& match_index);

struct BootstrapConfig {
  ExtractConfig extract;
  double min_fraction = 0.00001;
  size_t per_keyword_sample = 20;
  uint64_t seed = 0;
};

struct BootstrapResult {
  KeywordSet keyword_set;
  std::vector<std::string> potential_reviews;
  std::vector<std::string> labeling_batch;
};

// match -> extract (on matched reviews) -> prune_rare -> prune_subsumed ->
// re-match, plus a deduplicated per-keyword labeling sample.
BootstrapResult BootstrapRound(const std::vector<corpus::Review>& corpus,
                               const KeywordSet& keyword_set,
                               const features::WordVectorTable& word_vectors,
                               const BootstrapConfig& config = {});

}  // namespace cmine::keywords

#endif  // CMINE_KEYWORDS_H_

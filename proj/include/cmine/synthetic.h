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

// Deterministic synthetic review corpus with planted fairness topics, used
// for demos and end-to-end tests.

#ifndef CMINE_SYNTHETIC_H_
#define CMINE_SYNTHETIC_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cmine/corpus.h"
#include "cmine/features.h"

namespace cmine::synthetic {

struct SyntheticConfig {
  size_t num_reviews = 5000;
  size_t reviews_per_topic = 150;
  size_t labeled = 300;
  size_t labeled_fairness = 120;
  size_t word_dimension = 300;
  size_t sentence_dimension = 512;
  uint64_t seed = 7;
};

struct SyntheticCorpus {
  std::vector<corpus::Review> reviews;
  // Planted topic per review id; -1 for background reviews.
  std::map<std::string, int> topic_of;
  std::vector<std::string> topic_names;
  std::vector<corpus::LabeledReview> labels;
  features::WordVectorTable word_vectors{1};
  features::SentenceEmbeddingMatrix sentence_embeddings{1};
  std::vector<std::string> seed_keywords;
};

SyntheticCorpus Generate(const SyntheticConfig& config = {});

// Writes reviews.jsonl, labels.jsonl, ground_truth.jsonl, seeds.json,
// word_vectors.bin, sentence_embeddings.bin and a ready-to-run config.json.
void WriteCorpus(const SyntheticCorpus& corpus,
                 const std::filesystem::path& directory);

}  // namespace cmine::synthetic

#endif  // CMINE_SYNTHETIC_H_

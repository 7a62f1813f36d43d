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

// Feature extraction: character n-gram TF-IDF, averaged word vectors,
// precomputed sentence embeddings, and the union layout that concatenates
// them into one classifier input.

#ifndef CMINE_FEATURES_H_
#define CMINE_FEATURES_H_

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "cmine/corpus.h"
#include "json.hpp"

namespace cmine::features {

// Token -> dense vector table. Vectors are stored row-major as float, the
// precision of the on-disk formats.
class WordVectorTable {
 public:
  explicit WordVectorTable(size_t dimension);

  size_t dimension() const { return dimension_; }
  size_t size() const { return tokens_.size(); }
  bool empty() const { return tokens_.empty(); }

  // Throws DataError on a duplicate token or wrong dimension.
  void Add(std::string token, std::span<const float> vector);
  bool Contains(std::string_view token) const;
  // Empty span if absent.
  std::span<const float> Find(std::string_view token) const;

  const std::string& token(size_t i) const { return tokens_[i]; }
  std::span<const float> row(size_t i) const {
    return {values_.data() + i * dimension_, dimension_};
  }

 private:
  size_t dimension_;
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, size_t> index_;
  std::vector<float> values_;
};

// Sentence embeddings keyed by review id share the table representation.
using SentenceEmbeddingMatrix = WordVectorTable;

enum class VectorFormat { kBinary, kText };

// Binary: ASCII header "<vocab_size> <dim>\n" followed, per entry, by the
// token bytes, one space and dim little-endian IEEE-754 float32 values.
// Newlines before a token are skipped on read. Text: optional header line
// "<vocab_size> <dim>", then "token v1 ... vdim" per line.
WordVectorTable LoadWordVectors(const std::filesystem::path& path,
                                VectorFormat format);
WordVectorTable ParseWordVectors(std::string_view content,
                                 VectorFormat format);
std::string SerializeWordVectors(const WordVectorTable& table,
                                 VectorFormat format);
void SaveWordVectors(const WordVectorTable& table,
                     const std::filesystem::path& path, VectorFormat format);

// Mean of the vectors of in-vocabulary lowercase tokens; zero if none.
std::vector<double> EmbedDocument(std::string_view body,
                                  const WordVectorTable& table);

struct TfidfModel {
  std::vector<int> ngram_sizes;
  size_t max_features = 50000;
  // Sorted lexicographically; column i is vocabulary[i].
  std::vector<std::string> vocabulary;
  std::vector<double> idf;
  std::unordered_map<std::string, size_t> column;

  size_t width() const { return vocabulary.size(); }
  void RebuildIndex();
};

struct SparseVector {
  std::vector<uint32_t> indices;  // strictly increasing
  std::vector<double> values;

  double Norm() const;
};

// Character n-grams (code points) of the lowercased text, spaces included.
std::vector<std::string> CharNgrams(std::string_view text, int n);

// Keeps the max_features n-grams with the highest document frequency
// (ties: lexicographic). idf = ln((1 + N) / (1 + df)) + 1.
TfidfModel FitTfidf(std::span<const std::string> corpus,
                    std::vector<int> ngram_sizes = {4, 5, 6},
                    size_t max_features = 50000);

// Raw counts times idf, L2-normalized.
SparseVector TransformTfidf(const TfidfModel& model, std::string_view body);

enum class BlockKind { kTfidf, kWordAverage, kSentence };
std::string_view BlockName(BlockKind kind);
BlockKind ParseBlockName(std::string_view name);

struct Block {
  BlockKind kind;
  size_t offset;
  size_t width;
};

// Per-column affine map applied to the dense part: (x - mean) / scale.
struct Standardizer {
  std::vector<double> mean;
  std::vector<double> scale;

  bool fitted() const { return !mean.empty(); }
};

struct FeatureVector {
  // Sparse part lives in columns [0, sparse_width).
  SparseVector sparse;
  size_t sparse_width = 0;
  // Dense part occupies [sparse_width, sparse_width + dense.size()).
  std::vector<double> dense;

  size_t dimension() const { return sparse_width + dense.size(); }
};

// Ordered block layout plus the fitted state needed to transform a review.
// Word and sentence tables are borrowed; they are not persisted with the
// model and must be supplied again on load.
class FeatureUnionModel {
 public:
  const std::vector<Block>& blocks() const { return blocks_; }
  size_t total_dim() const { return total_dim_; }
  size_t sparse_width() const;
  size_t dense_width() const { return total_dim_ - sparse_width(); }
  bool HasBlock(BlockKind kind) const;

  const std::optional<TfidfModel>& tfidf() const { return tfidf_; }
  const Standardizer& standardizer() const { return standardizer_; }

  // Dense part before standardization.
  std::vector<double> RawDense(const corpus::Review& review) const;

  // Fits per-column mean/variance on the given (training) reviews.
  void FitStandardizer(std::span<const corpus::Review> training);
  void set_standardizer(Standardizer s);

  void AttachWordTable(std::shared_ptr<const WordVectorTable> table);
  void AttachSentenceMatrix(
      std::shared_ptr<const SentenceEmbeddingMatrix> matrix);

  nlohmann::json ToJson() const;
  static FeatureUnionModel FromJson(const nlohmann::json& j);

 private:
  friend FeatureUnionModel BuildUnion(
      std::vector<BlockKind>, std::optional<TfidfModel>,
      std::shared_ptr<const WordVectorTable>,
      std::shared_ptr<const SentenceEmbeddingMatrix>);

  std::vector<Block> blocks_;
  size_t total_dim_ = 0;
  std::optional<TfidfModel> tfidf_;
  size_t word_dim_ = 0;
  size_t sentence_dim_ = 0;
  std::shared_ptr<const WordVectorTable> word_table_;
  std::shared_ptr<const SentenceEmbeddingMatrix> sentence_matrix_;
  Standardizer standardizer_;
};

// Layout: tfidf first, then word average, then sentence, whatever the
// requested order. Throws UsageError naming a block without its resource.
FeatureUnionModel BuildUnion(
    std::vector<BlockKind> blocks, std::optional<TfidfModel> tfidf,
    std::shared_ptr<const WordVectorTable> word_table,
    std::shared_ptr<const SentenceEmbeddingMatrix> sentence_matrix);

// Throws DataError naming the review when its sentence row is missing.
FeatureVector TransformUnion(const FeatureUnionModel& model,
                             const corpus::Review& review);

}  // namespace cmine::features

#endif  // CMINE_FEATURES_H_

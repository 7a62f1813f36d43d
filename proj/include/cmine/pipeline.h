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

// Batch pipeline stages over one output directory:
//
//   ingest -> bootstrap -> export-labeling
//   ingest + labels -> train -> eval
//   train -> predict -> cluster -> report
//
// Every stage reads its predecessors' artifacts from the output directory,
// writes its own, and records input/output digests in manifest.json.

#ifndef CMINE_PIPELINE_H_
#define CMINE_PIPELINE_H_

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cmine/classify.h"
#include "cmine/cluster.h"
#include "cmine/corpus.h"
#include "cmine/evaluate.h"
#include "cmine/features.h"
#include "cmine/keywords.h"
#include "cmine/report.h"
#include "cmine/store.h"
#include "json.hpp"

namespace cmine::pipeline {

// Fixed artifact names inside the output directory.
namespace artifacts {
inline constexpr char kCleanReviews[] = "reviews.clean.jsonl";
inline constexpr char kIngestSummary[] = "ingest.json";
inline constexpr char kKeywords[] = "keywords.json";
inline constexpr char kLabelingBatch[] = "labeling_batch.jsonl";
inline constexpr char kLabelingExport[] = "labeling_export.csv";
inline constexpr char kCrossValidation[] = "cross_validation.json";
inline constexpr char kModel[] = "model.json";
inline constexpr char kEvaluation[] = "evaluation.json";
inline constexpr char kPredictions[] = "predictions.jsonl";
inline constexpr char kDistribution[] = "category_distribution.json";
inline constexpr char kOwnerSample[] = "owner_sample.json";
inline constexpr char kClusters[] = "clusters.json";
inline constexpr char kTopReviews[] = "top_reviews.jsonl";
inline constexpr char kConcerns[] = "concern_frequency.json";
inline constexpr char kJournal[] = "journal.jsonl";
inline constexpr char kManifest[] = "manifest.json";
inline constexpr char kLock[] = ".lock";
inline constexpr int kLayoutVersion = 1;
}  // namespace artifacts

struct PipelineConfig {
  std::filesystem::path corpus;
  corpus::InputFormat corpus_format = corpus::InputFormat::kJsonl;
  std::filesystem::path labels;  // optional
  std::filesystem::path seeds;   // JSON array of seed keywords
  std::filesystem::path word_vectors;
  features::VectorFormat word_vectors_format = features::VectorFormat::kBinary;
  std::filesystem::path sentence_embeddings;
  features::VectorFormat sentence_embeddings_format =
      features::VectorFormat::kBinary;
  std::filesystem::path output_dir = "out";

  uint64_t seed = 0;
  int min_words = 4;
  keywords::BootstrapConfig bootstrap;
  evaluate::FeatureConfig features;
  classify::TrainConfig train;
  int folds = 10;
  bool stratified = true;
  evaluate::SelectionPolicy selection =
      evaluate::SelectionPolicy::kMaxPrecisionThenAuc;
  cluster::ClusterConfig cluster;
  size_t top_n = 30;
  double sample_confidence = 0.99;
  double sample_margin = 0.02;
  std::vector<report::ReportFormat> report_formats = {
      report::ReportFormat::kMarkdown, report::ReportFormat::kJson,
      report::ReportFormat::kCsv};
  int port = 8080;

  // Relative paths resolve against base_dir. Unknown keys are rejected.
  static PipelineConfig FromJson(const nlohmann::json& j,
                                 const std::filesystem::path& base_dir);
  static PipelineConfig Load(const std::filesystem::path& path);
  nlohmann::json ToJson() const;
  // SHA-256 of the canonical JSON form.
  std::string Digest() const;
};

// Stage names in pipeline order.
const std::vector<std::string>& StageNames();

class Pipeline {
 public:
  explicit Pipeline(PipelineConfig config);

  const PipelineConfig& config() const { return config_; }
  std::filesystem::path Artifact(const std::string& name) const {
    return config_.output_dir / name;
  }

  // Runs one stage by name under the output-directory lock.
  void Run(const std::string& stage);
  // Runs ingest, bootstrap, export-labeling, train, eval, predict, cluster
  // and report in order.
  void RunAll();

  // Paths of the files written by the last report stage.
  const std::vector<std::filesystem::path>& report_files() const {
    return report_files_;
  }

  // Warnings emitted by the last stage (e.g. reviews skipped).
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  void Ingest();
  void Bootstrap();
  void ExportLabeling();
  void Train();
  void Eval();
  void Predict();
  void Cluster();
  void Report();

  // Throws DataError naming the stage when an artifact is missing.
  void Require(const std::string& artifact, const std::string& stage) const;
  std::vector<corpus::Review> CleanReviews() const;
  std::vector<corpus::LabeledReview> CurrentLabels() const;
  std::shared_ptr<const features::WordVectorTable> WordVectors();
  std::shared_ptr<const features::SentenceEmbeddingMatrix> SentenceEmbeddings();
  void RecordStage(const std::string& stage,
                   const std::vector<std::filesystem::path>& inputs,
                   const std::vector<std::filesystem::path>& outputs,
                   const std::string& started);

  PipelineConfig config_;
  std::shared_ptr<const features::WordVectorTable> word_vectors_;
  std::shared_ptr<const features::SentenceEmbeddingMatrix> sentence_;
  std::vector<std::filesystem::path> report_files_;
  std::vector<std::string> warnings_;
};

// Exclusive lock on an output directory (lock file holding the owner pid).
// A lock left by a dead process is taken over.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::filesystem::path& directory);
  ~DirectoryLock();
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  std::filesystem::path path_;
};

// Writes content to path atomically (temp file + rename).
void WriteFileAtomic(const std::filesystem::path& path,
                     const std::string& content);
std::string ReadFile(const std::filesystem::path& path);
std::string FileDigest(const std::filesystem::path& path);

// Loads the persisted clustering into a fresh topic registry plus the
// per-review cluster assignment.
struct ClusteringArtifact {
  int k = 0;
  std::map<std::string, int> assignments;
  std::map<std::string, double> silhouette;
  cluster::TopicRegistry topics;
  std::vector<report::ClusterSummary> summaries;  // compact clusters
  std::map<int, int64_t> sizes;
  std::map<int, double> mean_silhouette;
};
ClusteringArtifact LoadClustering(const std::filesystem::path& output_dir);

// Initial annotation state: labels file (if any) plus the clustering (if
// any), before journal replay.
store::AnnotationState InitialAnnotations(const PipelineConfig& config);

}  // namespace cmine::pipeline

#endif  // CMINE_PIPELINE_H_

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

#include "cmine/pipeline.h"

#include <fcntl.h>
#include <signal.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <chrono>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

namespace cmine::pipeline {

namespace fs = std::filesystem;
using nlohmann::json;
using nlohmann::ordered_json;

namespace {

// Stream ids for per-stage seeds derived from the global seed.
enum SeedStream : uint64_t {
  kBootstrapStream = 101,
  kTrainStream = 102,
  kFoldStream = 103,
  kClusterStream = 104,
  kSampleStream = 105,
};

const std::set<std::string> kTopLevelKeys = {
    "paths", "seed",   "ingest", "keywords", "features", "train",
    "cluster", "sample", "report", "serve"};

fs::path Resolve(const fs::path& base, const std::string& p) {
  if (p.empty()) return {};
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

std::string FormatName(corpus::InputFormat f) {
  return f == corpus::InputFormat::kCsv ? "csv" : "jsonl";
}

std::string FormatName(features::VectorFormat f) {
  return f == features::VectorFormat::kText ? "text" : "binary";
}

features::VectorFormat ParseVectorFormat(const std::string& s) {
  if (s == "binary") return features::VectorFormat::kBinary;
  if (s == "text") return features::VectorFormat::kText;
  throw UsageError("vector format must be 'binary' or 'text', got '" + s + "'");
}

std::string PolicyName(evaluate::SelectionPolicy p) {
  switch (p) {
    case evaluate::SelectionPolicy::kMaxAuc: return "max_auc";
    case evaluate::SelectionPolicy::kMaxF1: return "max_f1";
    default: return "max_precision_then_auc";
  }
}

std::string UtcNow() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buffer[32];
  std::strftime(buffer, sizeof buffer, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buffer;
}

std::string NewRunId() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buffer[48];
  std::strftime(buffer, sizeof buffer, "%Y%m%dT%H%M%SZ", &tm);
  return std::string(buffer) + "-" + std::to_string(::getpid());
}

std::string Relative(const fs::path& path, const fs::path& base) {
  std::error_code ec;
  fs::path rel = fs::relative(path, base, ec);
  if (ec || rel.empty() || rel.native().rfind("..", 0) == 0) return path.string();
  return rel.string();
}

std::string Fold(int index) { return "fold " + std::to_string(index + 1); }

}  // namespace

void WriteFileAtomic(const fs::path& path, const std::string& content) {
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out << content;
    out.flush();
    if (!out) {
      std::error_code ec;
      fs::remove(tmp, ec);
      throw DataError("cannot write " + path.string());
    }
  }
  fs::rename(tmp, path);
}

std::string ReadFile(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string FileDigest(const fs::path& path) { return Sha256Hex(ReadFile(path)); }

PipelineConfig PipelineConfig::FromJson(const json& j, const fs::path& base) {
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!kTopLevelKeys.contains(key)) {
      throw UsageError("unknown config key '" + key + "'");
    }
  }
  PipelineConfig c;
  try {
    const json paths = j.value("paths", json::object());
    c.corpus = Resolve(base, paths.value("corpus", std::string()));
    const std::string cf = paths.value("corpus_format", std::string("jsonl"));
    if (cf == "csv") {
      c.corpus_format = corpus::InputFormat::kCsv;
    } else if (cf != "jsonl") {
      throw UsageError("corpus_format must be 'jsonl' or 'csv'");
    }
    c.labels = Resolve(base, paths.value("labels", std::string()));
    c.seeds = Resolve(base, paths.value("seeds", std::string()));
    c.word_vectors = Resolve(base, paths.value("word_vectors", std::string()));
    c.word_vectors_format = ParseVectorFormat(
        paths.value("word_vectors_format", std::string("binary")));
    c.sentence_embeddings =
        Resolve(base, paths.value("sentence_embeddings", std::string()));
    c.sentence_embeddings_format = ParseVectorFormat(
        paths.value("sentence_embeddings_format", std::string("binary")));
    c.output_dir = Resolve(base, paths.value("output_dir", std::string("out")));

    c.seed = j.value("seed", uint64_t{0});
    c.min_words = j.value("ingest", json::object()).value("min_words", 4);

    const json kw = j.value("keywords", json::object());
    c.bootstrap.extract.min_ngram = kw.value("min_ngram", 1);
    c.bootstrap.extract.max_ngram = kw.value("max_ngram", 3);
    c.bootstrap.extract.seed_weight = kw.value("seed_weight", 0.7);
    c.bootstrap.extract.diversity_threshold =
        kw.value("diversity_threshold", 0.95);
    c.bootstrap.extract.top_n = kw.value("top_n", size_t{200});
    c.bootstrap.min_fraction = kw.value("min_fraction", 0.00001);
    c.bootstrap.per_keyword_sample = kw.value("per_keyword_sample", size_t{20});

    if (j.contains("features")) {
      c.features = evaluate::FeatureConfig::FromJson(j["features"]);
    }
    json train = j.value("train", json::object());
    c.folds = train.value("folds", 10);
    c.stratified = train.value("stratified", true);
    c.selection = evaluate::ParsePolicy(
        train.value("selection", std::string("max_precision_then_auc")));
    train.erase("folds");
    train.erase("stratified");
    train.erase("selection");
    c.train = classify::TrainConfig::FromJson(train);

    json cl = j.value("cluster", json::object());
    c.top_n = cl.value("top_n", size_t{30});
    cl.erase("top_n");
    c.cluster = cluster::ClusterConfig::FromJson(cl);

    const json sample = j.value("sample", json::object());
    c.sample_confidence = sample.value("confidence", 0.99);
    c.sample_margin = sample.value("margin", 0.02);
    corpus::SampleSpec check(c.sample_confidence, c.sample_margin);

    const json rep = j.value("report", json::object());
    if (rep.contains("formats")) {
      c.report_formats.clear();
      for (const json& f : rep["formats"]) {
        c.report_formats.push_back(report::ParseReportFormat(f.get<std::string>()));
      }
    }
    c.port = j.value("serve", json::object()).value("port", 8080);
  } catch (const json::exception& e) {
    throw UsageError(std::string("invalid config: ") + e.what());
  }
  // Every stage seed comes from the global seed.
  c.bootstrap.seed = DeriveSeed(c.seed, kBootstrapStream);
  c.train.seed = DeriveSeed(c.seed, kTrainStream);
  c.cluster.seed = DeriveSeed(c.seed, kClusterStream);
  if (c.folds < 2) throw UsageError("train.folds must be >= 2");
  if (c.min_words < 1) throw UsageError("ingest.min_words must be >= 1");
  if (c.top_n < 1) throw UsageError("cluster.top_n must be >= 1");
  if (c.cluster.k_min < 2 || c.cluster.k_max < c.cluster.k_min) {
    throw UsageError("cluster k range must satisfy 2 <= k_min <= k_max");
  }
  if (c.cluster.restarts < 1) throw UsageError("cluster.restarts must be >= 1");
  return c;
}

PipelineConfig PipelineConfig::Load(const fs::path& path) {
  std::string text;
  try {
    text = ReadFile(path);
  } catch (const DataError&) {
    throw UsageError("cannot read config file " + path.string());
  }
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw UsageError("config " + path.string() + " is not valid JSON: " +
                     e.what());
  }
  return FromJson(j, fs::absolute(path).parent_path());
}

json PipelineConfig::ToJson() const {
  json formats = json::array();
  for (auto f : report_formats) formats.push_back(std::string(report::ReportExtension(f)));
  json train_json = train.ToJson();
  train_json["folds"] = folds;
  train_json["stratified"] = stratified;
  train_json["selection"] = PolicyName(selection);
  json cluster_json = cluster.ToJson();
  cluster_json["top_n"] = top_n;
  return {
      {"paths",
       {{"corpus", corpus.string()},
        {"corpus_format", FormatName(corpus_format)},
        {"labels", labels.string()},
        {"seeds", seeds.string()},
        {"word_vectors", word_vectors.string()},
        {"word_vectors_format", FormatName(word_vectors_format)},
        {"sentence_embeddings", sentence_embeddings.string()},
        {"sentence_embeddings_format", FormatName(sentence_embeddings_format)},
        {"output_dir", output_dir.string()}}},
      {"seed", seed},
      {"ingest", {{"min_words", min_words}}},
      {"keywords",
       {{"min_ngram", bootstrap.extract.min_ngram},
        {"max_ngram", bootstrap.extract.max_ngram},
        {"seed_weight", bootstrap.extract.seed_weight},
        {"diversity_threshold", bootstrap.extract.diversity_threshold},
        {"top_n", bootstrap.extract.top_n},
        {"min_fraction", bootstrap.min_fraction},
        {"per_keyword_sample", bootstrap.per_keyword_sample}}},
      {"features", features.ToJson()},
      {"train", train_json},
      {"cluster", cluster_json},
      {"sample", {{"confidence", sample_confidence}, {"margin", sample_margin}}},
      {"report", {{"formats", formats}}},
      {"serve", {{"port", port}}}};
}

std::string PipelineConfig::Digest() const {
  // Output location and port do not affect any artifact's content.
  json j = ToJson();
  j["paths"].erase("output_dir");
  j.erase("serve");
  return Sha256Hex(j.dump());
}

const std::vector<std::string>& StageNames() {
  static const std::vector<std::string> names = {
      "ingest", "bootstrap", "export-labeling", "train",
      "eval",   "predict",   "cluster",         "report"};
  return names;
}

DirectoryLock::DirectoryLock(const fs::path& directory)
    : path_(directory / artifacts::kLock) {
  fs::create_directories(directory);
  for (int attempt = 0; attempt < 2; ++attempt) {
    const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_EXCL, 0644);
    if (fd >= 0) {
      const std::string pid = std::to_string(::getpid()) + "\n";
      [[maybe_unused]] ssize_t n = ::write(fd, pid.data(), pid.size());
      ::close(fd);
      return;
    }
    if (errno != EEXIST) {
      throw DataError("cannot create lock file " + path_.string());
    }
    long owner = 0;
    {
      std::ifstream in(path_);
      in >> owner;
    }
    if (owner > 0 && (::kill(static_cast<pid_t>(owner), 0) == 0 || errno == EPERM)) {
      throw UsageError("output directory " + directory.string() +
                       " is locked by running process " + std::to_string(owner));
    }
    std::error_code ec;
    fs::remove(path_, ec);  // stale lock from a dead process
  }
  throw UsageError("could not acquire lock " + path_.string());
}

DirectoryLock::~DirectoryLock() {
  std::error_code ec;
  fs::remove(path_, ec);
}

Pipeline::Pipeline(PipelineConfig config) : config_(std::move(config)) {}

void Pipeline::Run(const std::string& stage) {
  DirectoryLock lock(config_.output_dir);
  warnings_.clear();
  if (stage == "ingest") {
    Ingest();
  } else if (stage == "bootstrap") {
    Bootstrap();
  } else if (stage == "export-labeling") {
    ExportLabeling();
  } else if (stage == "train") {
    Train();
  } else if (stage == "eval") {
    Eval();
  } else if (stage == "predict") {
    Predict();
  } else if (stage == "cluster") {
    Cluster();
  } else if (stage == "report") {
    Report();
  } else {
    throw UsageError("unknown stage '" + stage + "'");
  }
}

void Pipeline::RunAll() {
  std::vector<std::string> all;
  for (const std::string& s : StageNames()) {
    Run(s);
    all.insert(all.end(), warnings_.begin(), warnings_.end());
  }
  warnings_ = std::move(all);
}

void Pipeline::Require(const std::string& artifact,
                       const std::string& stage) const {
  if (!fs::exists(Artifact(artifact))) {
    throw DataError("stage '" + stage + "' has not run: missing " +
                    Artifact(artifact).string());
  }
}

std::vector<corpus::Review> Pipeline::CleanReviews() const {
  Require(artifacts::kCleanReviews, "ingest");
  return corpus::ParseJsonl(ReadFile(Artifact(artifacts::kCleanReviews)));
}

std::vector<corpus::LabeledReview> Pipeline::CurrentLabels() const {
  store::AnnotationState state;
  if (!config_.labels.empty()) {
    for (auto& l : corpus::LoadLabels(config_.labels)) {
      state.labels[l.review_id] = std::move(l);
    }
  }
  store::Journal journal(Artifact(artifacts::kJournal));
  std::vector<json> label_events;
  for (json& e : journal.ReadAll()) {
    const std::string type = e.value("type", std::string());
    if (type == "label" || type == "resolve") label_events.push_back(std::move(e));
  }
  return store::Replay(std::move(state), label_events).LabelList();
}

std::shared_ptr<const features::WordVectorTable> Pipeline::WordVectors() {
  if (!word_vectors_) {
    if (config_.word_vectors.empty()) {
      throw UsageError("config paths.word_vectors is required");
    }
    word_vectors_ = std::make_shared<const features::WordVectorTable>(
        features::LoadWordVectors(config_.word_vectors,
                                  config_.word_vectors_format));
  }
  return word_vectors_;
}

std::shared_ptr<const features::SentenceEmbeddingMatrix>
Pipeline::SentenceEmbeddings() {
  if (!sentence_) {
    if (config_.sentence_embeddings.empty()) {
      throw UsageError("config paths.sentence_embeddings is required");
    }
    sentence_ = std::make_shared<const features::SentenceEmbeddingMatrix>(
        features::LoadWordVectors(config_.sentence_embeddings,
                                  config_.sentence_embeddings_format));
  }
  return sentence_;
}

void Pipeline::RecordStage(const std::string& stage,
                           const std::vector<fs::path>& inputs,
                           const std::vector<fs::path>& outputs,
                           const std::string& started) {
  const fs::path path = Artifact(artifacts::kManifest);
  ordered_json manifest;
  if (fs::exists(path)) {
    try {
      manifest = ordered_json::parse(ReadFile(path));
    } catch (const json::exception&) {
      manifest = ordered_json();
    }
  }
  const std::string digest = config_.Digest();
  if (!manifest.is_object() || manifest.value("config_digest", "") != digest) {
    manifest = ordered_json::object();
    manifest["layout_version"] = artifacts::kLayoutVersion;
    manifest["run_id"] = NewRunId();
    manifest["config_digest"] = digest;
    manifest["config"] = config_.ToJson();
    manifest["stages"] = ordered_json::object();
  }
  ordered_json in = ordered_json::object(), out = ordered_json::object();
  for (const fs::path& p : inputs) {
    if (fs::exists(p)) in[Relative(p, config_.output_dir)] = FileDigest(p);
  }
  for (const fs::path& p : outputs) {
    out[Relative(p, config_.output_dir)] = FileDigest(p);
  }
  manifest["stages"][stage] = {{"started", started},
                               {"finished", UtcNow()},
                               {"inputs", in},
                               {"outputs", out},
                               {"warnings", warnings_}};
  WriteFileAtomic(path, manifest.dump(2) + "\n");
}

void Pipeline::Ingest() {
  const std::string started = UtcNow();
  if (config_.corpus.empty()) throw UsageError("config paths.corpus is required");
  std::vector<corpus::Review> raw =
      corpus::IngestReviews(config_.corpus, config_.corpus_format);
  corpus::FunctionWordDetector detector;
  corpus::FilterResult filtered =
      corpus::FilterReviews(raw, config_.min_words, &detector);
  ordered_json dropped = ordered_json::array();
  std::map<std::string, int64_t> by_reason;
  for (const corpus::Dropped& d : filtered.dropped) {
    const std::string reason(corpus::DropReasonName(d.reason));
    dropped.push_back({{"id", d.id}, {"reason", reason}});
    ++by_reason[reason];
  }
  ordered_json summary = {{"input_reviews", raw.size()},
                          {"kept_reviews", filtered.kept.size()},
                          {"dropped_by_reason", by_reason},
                          {"dropped", dropped}};
  fs::create_directories(config_.output_dir);
  WriteFileAtomic(Artifact(artifacts::kCleanReviews), corpus::ToJsonl(filtered.kept));
  WriteFileAtomic(Artifact(artifacts::kIngestSummary), summary.dump(2) + "\n");
  RecordStage("ingest", {config_.corpus},
              {Artifact(artifacts::kCleanReviews), Artifact(artifacts::kIngestSummary)},
              started);
}

void Pipeline::Bootstrap() {
  const std::string started = UtcNow();
  std::vector<corpus::Review> reviews = CleanReviews();
  if (config_.seeds.empty()) throw UsageError("config paths.seeds is required");
  std::vector<std::string> seeds;
  try {
    seeds = json::parse(ReadFile(config_.seeds)).get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw DataError("seeds file must be a JSON array of strings: " +
                    std::string(e.what()));
  }
  keywords::KeywordSet initial = keywords::KeywordSet::FromSeeds(seeds);
  keywords::BootstrapResult result =
      keywords::BootstrapRound(reviews, initial, *WordVectors(), config_.bootstrap);
  ordered_json out = {{"keywords", result.keyword_set.ToJson()},
                      {"rarity_threshold",
                       keywords::RarityThreshold(
                           static_cast<int64_t>(reviews.size()),
                           config_.bootstrap.min_fraction)},
                      {"potential_reviews", result.potential_reviews},
                      {"labeling_batch", result.labeling_batch}};
  std::unordered_map<std::string, const corpus::Review*> by_id;
  for (const corpus::Review& r : reviews) by_id.emplace(r.id, &r);
  std::vector<corpus::Review> batch;
  for (const std::string& id : result.labeling_batch) batch.push_back(*by_id.at(id));
  WriteFileAtomic(Artifact(artifacts::kKeywords), out.dump(2) + "\n");
  WriteFileAtomic(Artifact(artifacts::kLabelingBatch), corpus::ToJsonl(batch));
  RecordStage("bootstrap",
              {Artifact(artifacts::kCleanReviews), config_.seeds, config_.word_vectors},
              {Artifact(artifacts::kKeywords), Artifact(artifacts::kLabelingBatch)},
              started);
}

void Pipeline::ExportLabeling() {
  const std::string started = UtcNow();
  Require(artifacts::kLabelingBatch, "bootstrap");
  std::vector<corpus::Review> batch =
      corpus::ParseJsonl(ReadFile(Artifact(artifacts::kLabelingBatch)));
  auto field = [](const std::string& s) {
    std::string out = "\"";
    for (char c : s) {
      if (c == '"') out += '"';
      out += c;
    }
    return out + "\"";
  };
  std::string csv = "review_id,app_id,category,body,label\n";
  for (const corpus::Review& r : batch) {
    csv += field(r.id) + "," + field(r.app_id) + "," + field(r.category) + "," +
           field(r.body) + ",\n";
  }
  WriteFileAtomic(Artifact(artifacts::kLabelingExport), csv);
  RecordStage("export-labeling", {Artifact(artifacts::kLabelingBatch)},
              {Artifact(artifacts::kLabelingExport)}, started);
}

void Pipeline::Train() {
  const std::string started = UtcNow();
  std::vector<corpus::Review> reviews = CleanReviews();
  std::unordered_map<std::string, size_t> index;
  for (size_t i = 0; i < reviews.size(); ++i) index.emplace(reviews[i].id, i);
  std::vector<std::pair<size_t, int>> rows;
  for (const corpus::LabeledReview& l : CurrentLabels()) {
    if (l.final_label == corpus::FinalLabel::kUnresolved) continue;
    auto it = index.find(l.review_id);
    if (it == index.end()) {
      warnings_.push_back("label for review '" + l.review_id +
                          "' skipped: not in the cleaned corpus");
      continue;
    }
    rows.emplace_back(it->second, l.final_label == corpus::FinalLabel::kFairness);
  }
  if (rows.empty()) {
    throw DataError("no resolved labels available for training");
  }
  std::sort(rows.begin(), rows.end());
  std::vector<corpus::Review> labeled;
  std::vector<int> y;
  for (const auto& [i, label] : rows) {
    labeled.push_back(reviews[i]);
    y.push_back(label);
  }
  evaluate::CrossValidationOptions options{
      config_.folds, DeriveSeed(config_.seed, kFoldStream), config_.stratified};
  auto uses = [&](features::BlockKind kind) {
    const auto& b = config_.features.blocks;
    return std::find(b.begin(), b.end(), kind) != b.end();
  };
  auto word = uses(features::BlockKind::kWordAverage) ? WordVectors() : nullptr;
  auto sentence =
      uses(features::BlockKind::kSentence) ? SentenceEmbeddings() : nullptr;
  evaluate::CrossValidationResult cv = evaluate::CrossValidateReviews(
      labeled, y, config_.features, config_.train, word, sentence, options);
  const evaluate::FoldResult& best =
      evaluate::SelectBestFold(cv.folds, config_.selection);

  classify::LogisticModel model = *best.model;
  model.set_provenance({{"fold_index", best.fold_index},
                        {"selection", PolicyName(config_.selection)},
                        {"config_digest", config_.Digest()},
                        {"training_reviews", labeled.size() - best.test_indices.size()}});
  json cv_json = cv.ToJson();
  cv_json["best_fold"] = best.fold_index;
  json ids = json::array();
  for (const corpus::Review& r : labeled) ids.push_back(r.id);
  cv_json["review_ids"] = ids;
  cv_json["labels"] = y;
  WriteFileAtomic(Artifact(artifacts::kCrossValidation), cv_json.dump(2) + "\n");
  classify::SaveModel(model, Artifact(artifacts::kModel));
  RecordStage("train",
              {Artifact(artifacts::kCleanReviews), config_.labels,
               Artifact(artifacts::kJournal)},
              {Artifact(artifacts::kCrossValidation), Artifact(artifacts::kModel)},
              started);
}

namespace {

classify::LogisticModel LoadAttachedModel(
    const fs::path& path,
    std::shared_ptr<const features::WordVectorTable> word,
    std::shared_ptr<const features::SentenceEmbeddingMatrix> sentence) {
  classify::LogisticModel model = classify::LoadModel(path);
  if (!model.layout()) throw DataError("model artifact has no feature layout");
  auto layout = std::make_shared<features::FeatureUnionModel>(*model.layout());
  if (layout->HasBlock(features::BlockKind::kWordAverage)) {
    layout->AttachWordTable(word);
  }
  if (layout->HasBlock(features::BlockKind::kSentence)) {
    layout->AttachSentenceMatrix(sentence);
  }
  model.set_layout(layout);
  return model;
}

}  // namespace

void Pipeline::Eval() {
  const std::string started = UtcNow();
  Require(artifacts::kModel, "train");
  Require(artifacts::kCrossValidation, "train");
  json cv = json::parse(ReadFile(Artifact(artifacts::kCrossValidation)));
  const int best = cv.at("best_fold").get<int>();
  ordered_json rows = ordered_json::array();
  std::vector<std::pair<std::string, evaluate::MetricsReport>> table;
  for (const json& f : cv.at("folds")) {
    const int index = f.at("fold_index").get<int>();
    auto m = evaluate::MetricsReport::FromJson(f.at("metrics"));
    table.emplace_back(Fold(index), m);
    rows.push_back({{"name", Fold(index)}, {"metrics", m.ToJson()}});
  }
  for (const json& f : cv.at("folds")) {
    if (f.at("fold_index").get<int>() != best) continue;
    auto m = evaluate::MetricsReport::FromJson(f.at("metrics"));
    const std::string name = "best (" + Fold(best) + ")";
    table.emplace_back(name, m);
    rows.push_back({{"name", name}, {"metrics", m.ToJson()}});
  }
  ordered_json out = {{"rows", rows},
                      {"best_fold", best},
                      {"summary", cv.at("summary")}};
  WriteFileAtomic(Artifact(artifacts::kEvaluation), out.dump(2) + "\n");
  WriteFileAtomic(Artifact("evaluation.md"), evaluate::FormatMetricsTable(table));
  RecordStage("eval",
              {Artifact(artifacts::kCrossValidation), Artifact(artifacts::kModel)},
              {Artifact(artifacts::kEvaluation), Artifact("evaluation.md")},
              started);
}

void Pipeline::Predict() {
  const std::string started = UtcNow();
  Require(artifacts::kModel, "train");
  std::vector<corpus::Review> reviews = CleanReviews();
  classify::LogisticModel probe = classify::LoadModel(Artifact(artifacts::kModel));
  auto word = probe.layout() &&
                      probe.layout()->HasBlock(features::BlockKind::kWordAverage)
                  ? WordVectors()
                  : nullptr;
  auto sentence = probe.layout() &&
                          probe.layout()->HasBlock(features::BlockKind::kSentence)
                      ? SentenceEmbeddings()
                      : nullptr;
  classify::LogisticModel model =
      LoadAttachedModel(Artifact(artifacts::kModel), word, sentence);

  std::string lines;
  std::map<std::string, Label> predictions;
  std::vector<corpus::Review> fairness;
  for (const corpus::Review& r : reviews) {
    features::FeatureVector x;
    try {
      x = features::TransformUnion(*model.layout(), r);
    } catch (const DataError& e) {
      warnings_.push_back(std::string("review skipped: ") + e.what());
      continue;
    }
    const double p = classify::PredictProba(model, x);
    const Label label = p >= model.threshold() ? Label::kFairness : Label::kNonFairness;
    predictions[r.id] = label;
    if (label == Label::kFairness) fairness.push_back(r);
    ordered_json j = {{"review_id", r.id}, {"score", p}, {"label", LabelName(label)}};
    lines += j.dump() + "\n";
  }
  report::CategoryDistribution distribution =
      report::ComputeCategoryDistribution(predictions, reviews);
  corpus::SampleSpec spec(config_.sample_confidence, config_.sample_margin);
  report::RootCauseSample sample = report::SampleOwnerResponses(
      fairness, spec, DeriveSeed(config_.seed, kSampleStream));
  if (sample.warning) warnings_.push_back(*sample.warning);

  WriteFileAtomic(Artifact(artifacts::kPredictions), lines);
  WriteFileAtomic(Artifact(artifacts::kDistribution),
                  distribution.ToJson().dump(2) + "\n");
  WriteFileAtomic(Artifact(artifacts::kOwnerSample), sample.ToJson().dump(2) + "\n");
  RecordStage("predict",
              {Artifact(artifacts::kCleanReviews), Artifact(artifacts::kModel),
               config_.word_vectors, config_.sentence_embeddings},
              {Artifact(artifacts::kPredictions), Artifact(artifacts::kDistribution),
               Artifact(artifacts::kOwnerSample)},
              started);
}

void Pipeline::Cluster() {
  const std::string started = UtcNow();
  Require(artifacts::kPredictions, "predict");
  std::vector<corpus::Review> reviews = CleanReviews();
  std::set<std::string> fairness;
  {
    std::istringstream in(ReadFile(Artifact(artifacts::kPredictions)));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      json j = json::parse(line);
      if (j.at("label").get<std::string>() == "fairness") {
        fairness.insert(j.at("review_id").get<std::string>());
      }
    }
  }
  auto sentence = SentenceEmbeddings();
  cluster::PointSet points(sentence->dimension());
  std::unordered_map<std::string, const corpus::Review*> by_id;
  for (const corpus::Review& r : reviews) {
    by_id.emplace(r.id, &r);
    if (!fairness.contains(r.id)) continue;
    auto row = sentence->Find(r.id);
    if (row.empty()) {
      warnings_.push_back("review '" + r.id + "' has no sentence embedding; skipped");
      continue;
    }
    points.AddAs<float>(r.id, row);
  }
  if (points.size() < 3) {
    throw DataError("only " + std::to_string(points.size()) +
                    " predicted fairness reviews with embeddings; need at least 3 "
                    "to cluster");
  }
  cluster::MeanSilhouetteMetric metric;
  cluster::KSelection selection = cluster::SelectK(points, config_.cluster, &metric);
  const cluster::KMeansResult& fit = selection.fits.at(selection.k_best);
  cluster::DistanceMatrix distances(points);
  cluster::SilhouetteReport silhouette =
      cluster::Silhouette(distances, fit.assignments);
  cluster::CompactSplit split = cluster::FilterCompact(silhouette);
  auto top = cluster::TopReviews(points, fit.assignments, silhouette, config_.top_n);

  std::set<int> all, compact(split.kept.begin(), split.kept.end());
  for (int c = 0; c < selection.k_best; ++c) all.insert(c);
  cluster::TopicRegistry registry(all, compact);

  ordered_json quality = ordered_json::array();
  for (const auto& [k, q] : selection.quality) {
    quality.push_back({{"k", k}, {"score", q}});
  }
  ordered_json assignments = ordered_json::array();
  std::map<std::string, int> assignment_map;
  for (size_t i = 0; i < points.size(); ++i) {
    assignments.push_back({{"review_id", points.id(i)},
                           {"cluster", fit.assignments[i]},
                           {"silhouette", silhouette.per_point[i]}});
    assignment_map[points.id(i)] = fit.assignments[i];
  }
  ordered_json clusters_json = ordered_json::array();
  std::map<int, int64_t> sizes;
  for (int c : fit.assignments) ++sizes[c];
  for (int c : all) {
    clusters_json.push_back(
        {{"cluster_id", c},
         {"size", sizes[c]},
         {"mean_silhouette", silhouette.per_cluster_mean.count(c)
                                 ? silhouette.per_cluster_mean.at(c)
                                 : 0.0},
         {"compact", compact.contains(c)}});
  }
  ordered_json out = {
      {"layout_version", artifacts::kLayoutVersion},
      {"k", selection.k_best},
      {"quality_metric", "mean_silhouette"},
      {"quality", quality},
      {"inertia", fit.model.inertia},
      {"iterations_run", fit.model.iterations_run},
      {"restart_index_of_best", fit.model.restart_index_of_best},
      {"centers_digest", Sha256Hex(json(fit.model.centers).dump())},
      {"overall_silhouette", silhouette.overall_mean},
      {"clusters", clusters_json},
      {"compact", split.kept},
      {"excluded", split.excluded},
      {"assignments", assignments},
      {"topics", registry.ToJson()}};

  std::unordered_map<std::string, size_t> point_index;
  for (size_t i = 0; i < points.size(); ++i) point_index.emplace(points.id(i), i);
  std::string top_lines;
  for (const auto& [c, ids] : top) {
    for (size_t rank = 0; rank < ids.size(); ++rank) {
      const size_t i = point_index.at(ids[rank]);
      ordered_json j = {{"cluster_id", c},
                        {"rank", rank + 1},
                        {"review_id", ids[rank]},
                        {"silhouette", silhouette.per_point[i]},
                        {"body", by_id.at(ids[rank])->body}};
      top_lines += j.dump() + "\n";
    }
  }
  report::ConcernFrequencyTable concerns =
      report::ComputeConcernFrequency(assignment_map, registry, reviews);
  WriteFileAtomic(Artifact(artifacts::kClusters), out.dump(2) + "\n");
  WriteFileAtomic(Artifact(artifacts::kTopReviews), top_lines);
  WriteFileAtomic(Artifact(artifacts::kConcerns), concerns.ToJson().dump(2) + "\n");
  RecordStage("cluster",
              {Artifact(artifacts::kPredictions), config_.sentence_embeddings},
              {Artifact(artifacts::kClusters), Artifact(artifacts::kTopReviews),
               Artifact(artifacts::kConcerns)},
              started);
}

ClusteringArtifact LoadClustering(const fs::path& output_dir) {
  const fs::path path = output_dir / artifacts::kClusters;
  if (!fs::exists(path)) {
    throw DataError("stage 'cluster' has not run: missing " + path.string());
  }
  ClusteringArtifact a;
  try {
    const json j = json::parse(ReadFile(path));
    a.k = j.at("k").get<int>();
    for (const json& row : j.at("assignments")) {
      const std::string id = row.at("review_id").get<std::string>();
      a.assignments[id] = row.at("cluster").get<int>();
      a.silhouette[id] = row.at("silhouette").get<double>();
    }
    for (const json& c : j.at("clusters")) {
      const int id = c.at("cluster_id").get<int>();
      a.sizes[id] = c.at("size").get<int64_t>();
      a.mean_silhouette[id] = c.at("mean_silhouette").get<double>();
    }
    a.topics = cluster::TopicRegistry::FromJson(j.at("topics"));
    std::map<int, report::ClusterSummary> summaries;
    for (int c : a.topics.compact_clusters()) {
      summaries[c] = {c, a.topics.ConcernOf(c), a.sizes[c], {}};
    }
    const fs::path top_path = output_dir / artifacts::kTopReviews;
    std::istringstream in(ReadFile(top_path));
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      const json t = json::parse(line);
      const int c = t.at("cluster_id").get<int>();
      summaries[c].top.push_back({t.at("review_id").get<std::string>(),
                                  t.at("silhouette").get<double>(),
                                  t.at("body").get<std::string>()});
    }
    for (auto& [c, s] : summaries) a.summaries.push_back(std::move(s));
  } catch (const json::exception& e) {
    throw DataError("corrupt clustering artifact: " + std::string(e.what()));
  }
  return a;
}

store::AnnotationState InitialAnnotations(const PipelineConfig& config) {
  store::AnnotationState state;
  if (!config.labels.empty() && fs::exists(config.labels)) {
    for (auto& l : corpus::LoadLabels(config.labels)) {
      state.labels[l.review_id] = std::move(l);
    }
  }
  if (fs::exists(config.output_dir / artifacts::kClusters)) {
    state.topics = LoadClustering(config.output_dir).topics;
  }
  return state;
}

void Pipeline::Report() {
  const std::string started = UtcNow();
  Require(artifacts::kEvaluation, "eval");
  Require(artifacts::kDistribution, "predict");
  Require(artifacts::kOwnerSample, "predict");
  Require(artifacts::kClusters, "cluster");
  std::vector<corpus::Review> reviews = CleanReviews();

  ClusteringArtifact clustering = LoadClustering(config_.output_dir);
  store::AnnotationState state;
  state.topics = clustering.topics;
  std::vector<std::string> skipped;
  state = store::Replay(std::move(state),
                        store::Journal(Artifact(artifacts::kJournal)).ReadAll(),
                        &skipped);
  for (const std::string& s : skipped) {
    if (s.find("\"type\":\"topic\"") != std::string::npos ||
        s.find("\"type\":\"merge\"") != std::string::npos) {
      warnings_.push_back("journal event not applied: " + s);
    }
  }
  for (report::ClusterSummary& s : clustering.summaries) {
    s.concern = state.topics->ConcernOf(s.cluster_id);
  }
  report::ConcernFrequencyTable concerns = report::ComputeConcernFrequency(
      clustering.assignments, *state.topics, reviews);
  WriteFileAtomic(Artifact(artifacts::kConcerns), concerns.ToJson().dump(2) + "\n");

  report::ReportArtifacts a;
  const json evaluation = json::parse(ReadFile(Artifact(artifacts::kEvaluation)));
  a.evaluation.emplace();
  for (const json& row : evaluation.at("rows")) {
    a.evaluation->emplace_back(row.at("name").get<std::string>(),
                               evaluate::MetricsReport::FromJson(row.at("metrics")));
  }
  a.distribution = report::CategoryDistribution::FromJson(
      json::parse(ReadFile(Artifact(artifacts::kDistribution))));
  a.owner_sample = report::RootCauseSample::FromJson(
      json::parse(ReadFile(Artifact(artifacts::kOwnerSample))));
  a.concerns = concerns;
  a.clusters = clustering.summaries;

  // Manifest first so the file names can carry its run id.
  RecordStage("report", {}, {Artifact(artifacts::kConcerns)}, started);
  const json manifest = json::parse(ReadFile(Artifact(artifacts::kManifest)));
  const std::string stem = "report-" + manifest.at("run_id").get<std::string>() +
                           "-" + config_.Digest().substr(0, 12);
  report_files_.clear();
  for (report::ReportFormat f : config_.report_formats) {
    const fs::path path =
        Artifact(stem + "." + std::string(report::ReportExtension(f)));
    WriteFileAtomic(path, report::RenderReport(a, f));
    report_files_.push_back(path);
  }
  std::vector<fs::path> outputs = report_files_;
  outputs.push_back(Artifact(artifacts::kConcerns));
  RecordStage("report",
              {Artifact(artifacts::kEvaluation), Artifact(artifacts::kDistribution),
               Artifact(artifacts::kOwnerSample), Artifact(artifacts::kClusters),
               Artifact(artifacts::kTopReviews), Artifact(artifacts::kJournal)},
              outputs, started);
}

}  // namespace cmine::pipeline

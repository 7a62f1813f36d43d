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

#include "cmine/features.h"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

namespace cmine::features {

using nlohmann::json;

WordVectorTable::WordVectorTable(size_t dimension) : dimension_(dimension) {
  if (dimension == 0) throw DataError("vector dimension must be positive");
}

void WordVectorTable::Add(std::string token, std::span<const float> vector) {
  if (vector.size() != dimension_) {
    throw DataError("dimension mismatch for token '" + token + "': expected " +
                    std::to_string(dimension_) + ", got " +
                    std::to_string(vector.size()));
  }
  if (index_.contains(token)) {
    throw DataError("duplicate token '" + token + "'");
  }
  index_.emplace(token, tokens_.size());
  tokens_.push_back(std::move(token));
  values_.insert(values_.end(), vector.begin(), vector.end());
}

bool WordVectorTable::Contains(std::string_view token) const {
  return index_.contains(std::string(token));
}

std::span<const float> WordVectorTable::Find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return {};
  return row(it->second);
}

namespace {

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

bool ParseSize(std::string_view text, size_t& out) {
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  return ec == std::errc() && ptr == text.data() + text.size();
}

std::string Truncated(size_t offset, std::string_view detail) {
  return "truncated vector file at byte offset " + std::to_string(offset) +
         ": " + std::string(detail);
}

float LoadLittleEndianFloat(const char* bytes) {
  uint32_t bits;
  std::memcpy(&bits, bytes, sizeof bits);
  if constexpr (std::endian::native == std::endian::big) {
    bits = __builtin_bswap32(bits);
  }
  float value;
  std::memcpy(&value, &bits, sizeof value);
  return value;
}

void StoreLittleEndianFloat(float value, std::string& out) {
  uint32_t bits;
  std::memcpy(&bits, &value, sizeof bits);
  if constexpr (std::endian::native == std::endian::big) {
    bits = __builtin_bswap32(bits);
  }
  char bytes[4];
  std::memcpy(bytes, &bits, sizeof bytes);
  out.append(bytes, 4);
}

WordVectorTable ParseBinary(std::string_view content) {
  size_t newline = content.find('\n');
  if (newline == std::string_view::npos) {
    throw DataError(Truncated(content.size(), "missing header line"));
  }
  std::vector<std::string> header =
      SplitWhitespace(content.substr(0, newline));
  size_t vocab = 0, dim = 0;
  if (header.size() != 2 || !ParseSize(header[0], vocab) ||
      !ParseSize(header[1], dim) || dim == 0) {
    throw DataError("malformed header: expected '<vocab_size> <dim>'");
  }
  WordVectorTable table(dim);
  std::vector<float> row(dim);
  size_t pos = newline + 1;
  for (size_t entry = 0; entry < vocab; ++entry) {
    while (pos < content.size() &&
           (content[pos] == '\n' || content[pos] == '\r')) {
      ++pos;
    }
    size_t space = content.find(' ', pos);
    if (space == std::string_view::npos) {
      throw DataError(Truncated(content.size(),
                                "entry " + std::to_string(entry) + " of " +
                                    std::to_string(vocab) + " missing"));
    }
    std::string token(content.substr(pos, space - pos));
    if (token.empty()) {
      throw DataError("empty token at byte offset " + std::to_string(pos));
    }
    pos = space + 1;
    if (content.size() - pos < dim * sizeof(float)) {
      throw DataError(Truncated(content.size(),
                                "token '" + token + "' needs " +
                                    std::to_string(dim) + " floats, " +
                                    std::to_string((content.size() - pos) / 4) +
                                    " present"));
    }
    for (size_t d = 0; d < dim; ++d) {
      row[d] = LoadLittleEndianFloat(content.data() + pos + 4 * d);
    }
    pos += dim * sizeof(float);
    table.Add(std::move(token), row);
  }
  return table;
}

WordVectorTable ParseText(std::string_view content) {
  std::optional<WordVectorTable> table;
  std::optional<size_t> declared_vocab;
  size_t pos = 0;
  bool first = true;
  std::vector<float> row;
  while (pos < content.size()) {
    size_t end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    std::vector<std::string> fields =
        SplitWhitespace(content.substr(pos, end - pos));
    pos = end + 1;
    if (fields.empty()) continue;
    if (first) {
      first = false;
      size_t vocab = 0, dim = 0;
      if (fields.size() == 2 && ParseSize(fields[0], vocab) &&
          ParseSize(fields[1], dim)) {
        table.emplace(dim);
        declared_vocab = vocab;
        continue;
      }
    }
    if (!table) table.emplace(fields.size() - 1);
    if (fields.size() - 1 != table->dimension()) {
      throw DataError("dimension mismatch for token '" + fields[0] +
                      "': expected " + std::to_string(table->dimension()) +
                      " values, found " + std::to_string(fields.size() - 1));
    }
    row.resize(fields.size() - 1);
    for (size_t d = 1; d < fields.size(); ++d) {
      const std::string& f = fields[d];
      auto [ptr, ec] = std::from_chars(f.data(), f.data() + f.size(), row[d - 1]);
      if (ec != std::errc() || ptr != f.data() + f.size()) {
        throw DataError("invalid number '" + f + "' for token '" + fields[0] +
                        "'");
      }
    }
    table->Add(std::move(fields[0]), row);
  }
  if (!table) throw DataError("empty vector file (no header)");
  if (declared_vocab && table->size() != *declared_vocab) {
    throw DataError(Truncated(content.size(),
                              "header declares " +
                                  std::to_string(*declared_vocab) +
                                  " entries, found " +
                                  std::to_string(table->size())));
  }
  return std::move(*table);
}

}  // namespace

WordVectorTable ParseWordVectors(std::string_view content,
                                 VectorFormat format) {
  return format == VectorFormat::kBinary ? ParseBinary(content)
                                         : ParseText(content);
}

WordVectorTable LoadWordVectors(const std::filesystem::path& path,
                                VectorFormat format) {
  return ParseWordVectors(ReadFile(path), format);
}

std::string SerializeWordVectors(const WordVectorTable& table,
                                 VectorFormat format) {
  std::string out = std::to_string(table.size()) + " " +
                    std::to_string(table.dimension()) + "\n";
  char buffer[64];
  for (size_t i = 0; i < table.size(); ++i) {
    out += table.token(i);
    if (format == VectorFormat::kBinary) {
      out.push_back(' ');
      for (float v : table.row(i)) StoreLittleEndianFloat(v, out);
    } else {
      for (float v : table.row(i)) {
        auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof buffer, v);
        out.push_back(' ');
        out.append(buffer, ptr);
      }
      out.push_back('\n');
    }
  }
  return out;
}

void SaveWordVectors(const WordVectorTable& table,
                     const std::filesystem::path& path, VectorFormat format) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << SerializeWordVectors(table, format);
}

std::vector<double> EmbedDocument(std::string_view body,
                                  const WordVectorTable& table) {
  std::vector<double> mean(table.dimension(), 0.0);
  size_t hits = 0;
  for (const std::string& token : SplitWhitespace(body)) {
    auto vector = table.Find(utf8::ToLower(token));
    if (vector.empty()) continue;
    ++hits;
    for (size_t d = 0; d < mean.size(); ++d) mean[d] += vector[d];
  }
  if (hits > 0) {
    for (double& v : mean) v /= static_cast<double>(hits);
  }
  return mean;
}

void TfidfModel::RebuildIndex() {
  column.clear();
  for (size_t i = 0; i < vocabulary.size(); ++i) column.emplace(vocabulary[i], i);
}

double SparseVector::Norm() const {
  double sum = 0.0;
  for (double v : values) sum += v * v;
  return std::sqrt(sum);
}

std::vector<std::string> CharNgrams(std::string_view text, int n) {
  std::vector<char32_t> cps = utf8::Decode(utf8::ToLower(text));
  std::vector<std::string> grams;
  if (n <= 0 || cps.size() < static_cast<size_t>(n)) return grams;
  grams.reserve(cps.size() - n + 1);
  for (size_t i = 0; i + n <= cps.size(); ++i) {
    grams.push_back(utf8::Encode(std::span(cps).subspan(i, n)));
  }
  return grams;
}

TfidfModel FitTfidf(std::span<const std::string> corpus,
                    std::vector<int> ngram_sizes, size_t max_features) {
  if (corpus.empty()) throw DataError("cannot fit TF-IDF on an empty corpus");
  if (ngram_sizes.empty()) throw UsageError("no n-gram sizes given");
  std::sort(ngram_sizes.begin(), ngram_sizes.end());
  ngram_sizes.erase(std::unique(ngram_sizes.begin(), ngram_sizes.end()),
                    ngram_sizes.end());
  std::unordered_map<std::string, size_t> df;
  for (const std::string& doc : corpus) {
    std::vector<std::string> grams;
    for (int n : ngram_sizes) {
      auto g = CharNgrams(doc, n);
      grams.insert(grams.end(), std::make_move_iterator(g.begin()),
                   std::make_move_iterator(g.end()));
    }
    std::sort(grams.begin(), grams.end());
    grams.erase(std::unique(grams.begin(), grams.end()), grams.end());
    for (auto& g : grams) ++df[std::move(g)];
  }
  std::vector<std::pair<std::string, size_t>> ranked(df.begin(), df.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > max_features) ranked.resize(max_features);
  std::sort(ranked.begin(), ranked.end());

  TfidfModel model;
  model.ngram_sizes = ngram_sizes;
  model.max_features = max_features;
  const double n_docs = static_cast<double>(corpus.size());
  for (auto& [gram, count] : ranked) {
    model.vocabulary.push_back(gram);
    model.idf.push_back(
        std::log((1.0 + n_docs) / (1.0 + static_cast<double>(count))) + 1.0);
  }
  model.RebuildIndex();
  return model;
}

SparseVector TransformTfidf(const TfidfModel& model, std::string_view body) {
  std::map<uint32_t, double> counts;
  for (int n : model.ngram_sizes) {
    for (const std::string& gram : CharNgrams(body, n)) {
      auto it = model.column.find(gram);
      if (it != model.column.end()) counts[static_cast<uint32_t>(it->second)] += 1.0;
    }
  }
  SparseVector out;
  double norm = 0.0;
  for (auto [column, tf] : counts) {
    double value = tf * model.idf[column];
    out.indices.push_back(column);
    out.values.push_back(value);
    norm += value * value;
  }
  if (norm > 0.0) {
    norm = std::sqrt(norm);
    for (double& v : out.values) v /= norm;
  }
  return out;
}

std::string_view BlockName(BlockKind kind) {
  switch (kind) {
    case BlockKind::kTfidf:
      return "tfidf";
    case BlockKind::kWordAverage:
      return "word_avg";
    case BlockKind::kSentence:
      return "sentence";
  }
  return "?";
}

BlockKind ParseBlockName(std::string_view name) {
  if (name == "tfidf") return BlockKind::kTfidf;
  if (name == "word_avg") return BlockKind::kWordAverage;
  if (name == "sentence") return BlockKind::kSentence;
  throw UsageError("unknown feature block '" + std::string(name) + "'");
}

size_t FeatureUnionModel::sparse_width() const {
  for (const Block& b : blocks_) {
    if (b.kind == BlockKind::kTfidf) return b.width;
  }
  return 0;
}

bool FeatureUnionModel::HasBlock(BlockKind kind) const {
  return std::any_of(blocks_.begin(), blocks_.end(),
                     [kind](const Block& b) { return b.kind == kind; });
}

FeatureUnionModel BuildUnion(
    std::vector<BlockKind> kinds, std::optional<TfidfModel> tfidf,
    std::shared_ptr<const WordVectorTable> word_table,
    std::shared_ptr<const SentenceEmbeddingMatrix> sentence_matrix) {
  if (kinds.empty()) throw UsageError("feature union needs at least one block");
  std::sort(kinds.begin(), kinds.end());
  if (std::adjacent_find(kinds.begin(), kinds.end()) != kinds.end()) {
    throw UsageError("duplicate feature block");
  }
  FeatureUnionModel model;
  size_t offset = 0;
  for (BlockKind kind : kinds) {
    size_t width = 0;
    switch (kind) {
      case BlockKind::kTfidf:
        if (!tfidf) throw UsageError("block 'tfidf' requires a fitted TF-IDF model");
        width = tfidf->width();
        model.tfidf_ = std::move(tfidf);
        break;
      case BlockKind::kWordAverage:
        if (!word_table) throw UsageError("block 'word_avg' requires a word-vector table");
        width = word_table->dimension();
        model.word_dim_ = width;
        model.word_table_ = std::move(word_table);
        break;
      case BlockKind::kSentence:
        if (!sentence_matrix) {
          throw UsageError("block 'sentence' requires a sentence-embedding matrix");
        }
        width = sentence_matrix->dimension();
        model.sentence_dim_ = width;
        model.sentence_matrix_ = std::move(sentence_matrix);
        break;
    }
    model.blocks_.push_back({kind, offset, width});
    offset += width;
  }
  model.total_dim_ = offset;
  return model;
}

std::vector<double> FeatureUnionModel::RawDense(
    const corpus::Review& review) const {
  std::vector<double> dense;
  dense.reserve(dense_width());
  for (const Block& block : blocks_) {
    if (block.kind == BlockKind::kWordAverage) {
      if (!word_table_) throw UsageError("word-vector table not attached");
      auto v = EmbedDocument(review.body, *word_table_);
      dense.insert(dense.end(), v.begin(), v.end());
    } else if (block.kind == BlockKind::kSentence) {
      if (!sentence_matrix_) throw UsageError("sentence matrix not attached");
      auto row = sentence_matrix_->Find(review.id);
      if (row.empty()) {
        throw DataError("no sentence embedding for review '" + review.id + "'");
      }
      dense.insert(dense.end(), row.begin(), row.end());
    }
  }
  return dense;
}

void FeatureUnionModel::FitStandardizer(
    std::span<const corpus::Review> training) {
  const size_t width = dense_width();
  Standardizer s;
  if (width == 0) {
    standardizer_ = s;
    return;
  }
  if (training.empty()) throw DataError("cannot standardize on zero reviews");
  s.mean.assign(width, 0.0);
  s.scale.assign(width, 0.0);
  std::vector<std::vector<double>> rows;
  rows.reserve(training.size());
  for (const corpus::Review& r : training) rows.push_back(RawDense(r));
  const double n = static_cast<double>(rows.size());
  for (const auto& row : rows) {
    for (size_t j = 0; j < width; ++j) s.mean[j] += row[j];
  }
  for (double& m : s.mean) m /= n;
  for (const auto& row : rows) {
    for (size_t j = 0; j < width; ++j) {
      double d = row[j] - s.mean[j];
      s.scale[j] += d * d;
    }
  }
  for (double& v : s.scale) {
    v = std::sqrt(v / n);
    // Constant columns pass through centred but unscaled.
    if (!(v > 1e-12)) v = 1.0;
  }
  standardizer_ = std::move(s);
}

void FeatureUnionModel::set_standardizer(Standardizer s) {
  if (s.fitted() && (s.mean.size() != dense_width() ||
                     s.scale.size() != dense_width())) {
    throw DataError("standardizer width does not match dense layout");
  }
  standardizer_ = std::move(s);
}

void FeatureUnionModel::AttachWordTable(
    std::shared_ptr<const WordVectorTable> table) {
  if (table && word_dim_ != 0 && table->dimension() != word_dim_) {
    throw DataError("word-vector dimension " +
                    std::to_string(table->dimension()) +
                    " does not match model layout " +
                    std::to_string(word_dim_));
  }
  word_table_ = std::move(table);
}

void FeatureUnionModel::AttachSentenceMatrix(
    std::shared_ptr<const SentenceEmbeddingMatrix> matrix) {
  if (matrix && sentence_dim_ != 0 && matrix->dimension() != sentence_dim_) {
    throw DataError("sentence-embedding dimension " +
                    std::to_string(matrix->dimension()) +
                    " does not match model layout " +
                    std::to_string(sentence_dim_));
  }
  sentence_matrix_ = std::move(matrix);
}

json FeatureUnionModel::ToJson() const {
  json j;
  json blocks = json::array();
  for (const Block& b : blocks_) {
    blocks.push_back(
        {{"kind", BlockName(b.kind)}, {"offset", b.offset}, {"width", b.width}});
  }
  j["blocks"] = blocks;
  j["total_dim"] = total_dim_;
  if (tfidf_) {
    j["tfidf"] = {{"ngram_sizes", tfidf_->ngram_sizes},
                  {"max_features", tfidf_->max_features},
                  {"vocabulary", tfidf_->vocabulary},
                  {"idf", tfidf_->idf}};
  }
  j["standardizer"] = {{"mean", standardizer_.mean},
                       {"scale", standardizer_.scale}};
  return j;
}

FeatureUnionModel FeatureUnionModel::FromJson(const json& j) {
  FeatureUnionModel model;
  try {
    size_t offset = 0;
    for (const json& b : j.at("blocks")) {
      Block block{ParseBlockName(b.at("kind").get<std::string>()),
                  b.at("offset").get<size_t>(), b.at("width").get<size_t>()};
      if (block.offset != offset) throw DataError("non-contiguous block layout");
      offset += block.width;
      if (block.kind == BlockKind::kWordAverage) model.word_dim_ = block.width;
      if (block.kind == BlockKind::kSentence) model.sentence_dim_ = block.width;
      model.blocks_.push_back(block);
    }
    model.total_dim_ = j.at("total_dim").get<size_t>();
    if (model.total_dim_ != offset) throw DataError("total_dim mismatch");
    if (j.contains("tfidf")) {
      const json& t = j.at("tfidf");
      TfidfModel tfidf;
      tfidf.ngram_sizes = t.at("ngram_sizes").get<std::vector<int>>();
      tfidf.max_features = t.at("max_features").get<size_t>();
      tfidf.vocabulary = t.at("vocabulary").get<std::vector<std::string>>();
      tfidf.idf = t.at("idf").get<std::vector<double>>();
      if (tfidf.idf.size() != tfidf.vocabulary.size()) {
        throw DataError("tfidf idf/vocabulary length mismatch");
      }
      tfidf.RebuildIndex();
      model.tfidf_ = std::move(tfidf);
    }
    if (model.HasBlock(BlockKind::kTfidf) &&
        (!model.tfidf_ || model.tfidf_->width() != model.sparse_width())) {
      throw DataError("tfidf block width does not match vocabulary");
    }
    Standardizer s;
    s.mean = j.at("standardizer").at("mean").get<std::vector<double>>();
    s.scale = j.at("standardizer").at("scale").get<std::vector<double>>();
    model.set_standardizer(std::move(s));
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed feature layout: ") + e.what());
  }
  return model;
}

FeatureVector TransformUnion(const FeatureUnionModel& model,
                             const corpus::Review& review) {
  FeatureVector out;
  out.sparse_width = model.sparse_width();
  if (model.tfidf() && model.HasBlock(BlockKind::kTfidf)) {
    out.sparse = TransformTfidf(*model.tfidf(), review.body);
  }
  out.dense = model.RawDense(review);
  const Standardizer& s = model.standardizer();
  if (s.fitted()) {
    for (size_t j = 0; j < out.dense.size(); ++j) {
      out.dense[j] = (out.dense[j] - s.mean[j]) / s.scale[j];
    }
  }
  return out;
}

}  // namespace cmine::features

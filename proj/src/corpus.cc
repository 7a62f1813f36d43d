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

#include "cmine/corpus.h"

#include <unicode/uchar.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <unordered_map>

#include "json.hpp"

namespace cmine::corpus {

using nlohmann::ordered_json;

std::string_view FinalLabelName(FinalLabel label) {
  switch (label) {
    case FinalLabel::kFairness:
      return "fairness";
    case FinalLabel::kNonFairness:
      return "non_fairness";
    case FinalLabel::kUnresolved:
      return "unresolved";
  }
  return "unresolved";
}

FinalLabel ParseFinalLabel(std::string_view name) {
  if (name == "unresolved") return FinalLabel::kUnresolved;
  return ParseLabel(name) == Label::kFairness ? FinalLabel::kFairness
                                              : FinalLabel::kNonFairness;
}

namespace {

std::string ReadFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string RowError(size_t row, std::string_view field,
                     std::string_view what) {
  std::ostringstream msg;
  msg << "row " << row << ", field '" << field << "': " << what;
  return msg.str();
}

// Raw key/value access shared by the JSONL and CSV readers.
class RowReader {
 public:
  virtual ~RowReader() = default;
  virtual std::optional<std::string> Get(std::string_view key) const = 0;
};

Review BuildReview(const RowReader& row, size_t row_number) {
  auto required = [&](std::string_view key) {
    auto value = row.Get(key);
    if (!value) throw DataError(RowError(row_number, key, "missing"));
    return *value;
  };
  Review review;
  review.id = required("id");
  if (review.id.empty()) throw DataError(RowError(row_number, "id", "empty"));
  review.app_id = required("app_id");
  review.category = required("category");
  if (review.category.empty()) {
    throw DataError(RowError(row_number, "category", "empty"));
  }
  review.raw_body = required("body");
  review.body = review.raw_body;
  if (auto rating = row.Get("rating"); rating && !rating->empty()) {
    int value = 0;
    try {
      size_t used = 0;
      value = std::stoi(*rating, &used);
      if (used != rating->size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      throw DataError(RowError(row_number, "rating", "not an integer"));
    }
    if (value < 1 || value > 5) {
      throw DataError(RowError(row_number, "rating", "outside 1..5"));
    }
    review.rating = value;
  }
  if (auto response = row.Get("owner_response");
      response && !response->empty()) {
    review.owner_response = *response;
  }
  return review;
}

class JsonRow : public RowReader {
 public:
  JsonRow(const ordered_json& object, size_t row) : object_(object), row_(row) {}

  std::optional<std::string> Get(std::string_view key) const override {
    auto it = object_.find(std::string(key));
    if (it == object_.end() || it->is_null()) return std::nullopt;
    if (it->is_string()) return it->get<std::string>();
    if (it->is_number_integer()) return std::to_string(it->get<int64_t>());
    throw DataError(RowError(row_, key, "expected string or integer"));
  }

 private:
  const ordered_json& object_;
  size_t row_;
};

class CsvRow : public RowReader {
 public:
  CsvRow(const std::map<std::string, size_t, std::less<>>& columns,
         const std::vector<std::string>& cells)
      : columns_(columns), cells_(cells) {}

  std::optional<std::string> Get(std::string_view key) const override {
    auto it = columns_.find(key);
    if (it == columns_.end()) return std::nullopt;
    return cells_[it->second];
  }

 private:
  const std::map<std::string, size_t, std::less<>>& columns_;
  const std::vector<std::string>& cells_;
};

void CheckDuplicate(std::unordered_map<std::string, size_t>& seen,
                    const Review& review, size_t row) {
  auto [it, inserted] = seen.emplace(review.id, row);
  if (!inserted) {
    std::ostringstream msg;
    msg << "row " << row << ": duplicate id '" << review.id
        << "' (first seen at row " << it->second << ")";
    throw DataError(msg.str());
  }
}

struct CsvRecord {
  size_t line;
  std::vector<std::string> cells;
};

std::vector<CsvRecord> SplitCsv(std::string_view content) {
  std::vector<CsvRecord> records;
  CsvRecord current{1, {}};
  std::string cell;
  size_t line = 1;
  bool in_quotes = false;
  bool cell_started = false;
  size_t i = 0;
  auto end_record = [&] {
    current.cells.push_back(std::move(cell));
    cell.clear();
    records.push_back(std::move(current));
    current = CsvRecord{line, {}};
    cell_started = false;
  };
  if (content.substr(0, 3) == "\xEF\xBB\xBF") i = 3;
  for (; i < content.size(); ++i) {
    char c = content[i];
    if (in_quotes) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          cell.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (c == '\n') ++line;
        cell.push_back(c);
      }
      continue;
    }
    switch (c) {
      case '"':
        if (cell_started && !cell.empty()) {
          throw DataError("line " + std::to_string(line) +
                          ": quote inside unquoted field");
        }
        in_quotes = true;
        cell_started = true;
        break;
      case ',':
        current.cells.push_back(std::move(cell));
        cell.clear();
        cell_started = false;
        break;
      case '\r':
        break;
      case '\n':
        ++line;
        end_record();
        current.line = line;
        break;
      default:
        cell.push_back(c);
        cell_started = true;
    }
  }
  if (in_quotes) {
    throw DataError("line " + std::to_string(current.line) +
                    ": unterminated quoted field");
  }
  if (cell_started || !cell.empty() || !current.cells.empty()) end_record();
  // Blank lines are not records.
  std::erase_if(records, [](const CsvRecord& r) {
    return r.cells.size() == 1 && r.cells[0].empty();
  });
  return records;
}

}  // namespace

std::vector<Review> ParseJsonl(std::string_view content) {
  std::vector<Review> reviews;
  std::unordered_map<std::string, size_t> seen;
  size_t line_number = 0;
  size_t start = 0;
  while (start < content.size()) {
    size_t end = content.find('\n', start);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(start, end - start);
    start = end + 1;
    ++line_number;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    ordered_json object;
    try {
      object = ordered_json::parse(line);
    } catch (const ordered_json::parse_error& e) {
      throw DataError(RowError(line_number, "<line>",
                               std::string("invalid JSON: ") + e.what()));
    }
    if (!object.is_object()) {
      throw DataError(RowError(line_number, "<line>", "not a JSON object"));
    }
    Review review = BuildReview(JsonRow(object, line_number), line_number);
    CheckDuplicate(seen, review, line_number);
    reviews.push_back(std::move(review));
  }
  return reviews;
}

std::vector<Review> ParseCsv(std::string_view content) {
  std::vector<CsvRecord> records = SplitCsv(content);
  if (records.empty()) return {};
  std::map<std::string, size_t, std::less<>> columns;
  for (size_t i = 0; i < records[0].cells.size(); ++i) {
    columns.emplace(records[0].cells[i], i);
  }
  for (std::string_view key : {"id", "app_id", "category", "body"}) {
    if (!columns.contains(key)) {
      throw DataError(RowError(1, key, "missing from CSV header"));
    }
  }
  std::vector<Review> reviews;
  std::unordered_map<std::string, size_t> seen;
  for (size_t r = 1; r < records.size(); ++r) {
    const CsvRecord& record = records[r];
    if (record.cells.size() != records[0].cells.size()) {
      std::ostringstream msg;
      msg << "row " << record.line << ": expected " << records[0].cells.size()
          << " fields, found " << record.cells.size();
      throw DataError(msg.str());
    }
    Review review = BuildReview(CsvRow(columns, record.cells), record.line);
    CheckDuplicate(seen, review, record.line);
    reviews.push_back(std::move(review));
  }
  return reviews;
}

std::vector<Review> IngestReviews(const std::filesystem::path& path,
                                  InputFormat format) {
  std::string content = ReadFile(path);
  return format == InputFormat::kJsonl ? ParseJsonl(content)
                                       : ParseCsv(content);
}

std::string ToJsonl(const std::vector<Review>& reviews) {
  std::string out;
  for (const Review& r : reviews) {
    ordered_json object;
    object["id"] = r.id;
    object["app_id"] = r.app_id;
    object["category"] = r.category;
    if (r.rating) object["rating"] = *r.rating;
    if (r.owner_response) object["owner_response"] = *r.owner_response;
    object["raw_body"] = r.raw_body;
    object["body"] = r.body;
    out += object.dump();
    out += '\n';
  }
  return out;
}

void WriteJsonl(const std::filesystem::path& path,
                const std::vector<Review>& reviews) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << ToJsonl(reviews);
}

namespace {

bool IsEmoji(UChar32 c) {
  return u_hasBinaryProperty(c, UCHAR_EMOJI_PRESENTATION) ||
         u_hasBinaryProperty(c, UCHAR_EXTENDED_PICTOGRAPHIC) ||
         u_hasBinaryProperty(c, UCHAR_EMOJI_MODIFIER) || c == 0xFE0F ||
         c == 0x200D;
}

bool IsApostrophe(UChar32 c) { return c == 0x27 || c == 0x2019 || c == 0x2BC; }

enum class CharClass { kKeep, kSeparator, kDelete };

CharClass Classify(UChar32 c) {
  if (IsApostrophe(c)) return CharClass::kDelete;
  if (u_isUWhiteSpace(c) || IsEmoji(c)) return CharClass::kSeparator;
  switch (u_charType(c)) {
    case U_DECIMAL_DIGIT_NUMBER:
    case U_CONNECTOR_PUNCTUATION:
    case U_DASH_PUNCTUATION:
    case U_START_PUNCTUATION:
    case U_END_PUNCTUATION:
    case U_INITIAL_PUNCTUATION:
    case U_FINAL_PUNCTUATION:
    case U_OTHER_PUNCTUATION:
    case U_MATH_SYMBOL:
    case U_MODIFIER_SYMBOL:
    case U_OTHER_SYMBOL:
    case U_CONTROL_CHAR:
      return CharClass::kSeparator;
    default:
      return CharClass::kKeep;
  }
}

}  // namespace

std::string CleanText(std::string_view raw) {
  std::vector<std::u32string> tokens;
  std::u32string current;
  for (char32_t cp : utf8::Decode(raw)) {
    switch (Classify(static_cast<UChar32>(cp))) {
      case CharClass::kKeep:
        current.push_back(cp);
        break;
      case CharClass::kDelete:
        break;
      case CharClass::kSeparator:
        if (!current.empty()) tokens.push_back(std::move(current));
        current.clear();
        break;
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  std::string out;
  for (const auto& token : tokens) {
    if (token.size() < 2) continue;
    if (!out.empty()) out.push_back(' ');
    for (char32_t cp : token) utf8::Append(out, cp);
  }
  return out;
}

void CleanAll(std::vector<Review>& reviews) {
  for (Review& r : reviews) r.body = CleanText(r.raw_body);
}

const std::unordered_set<std::string>& StopWords() {
  static const std::unordered_set<std::string> kWords = {
      "the",  "an",   "and",   "or",    "but",  "if",    "of",   "to",
      "in",   "on",   "at",    "by",    "for",  "with",  "from", "as",
      "is",   "are",  "was",   "were",  "be",   "been",  "it",   "its",
      "this", "that", "these", "those", "you",  "he",    "she",  "we",
      "they", "me",   "my",    "your",  "our",  "their", "not",  "no",
      "so",   "do",   "does",  "did",   "have", "has",   "had",  "can",
      "will", "would"};
  return kWords;
}

bool IsStopWord(std::string_view lowercase_token) {
  return StopWords().contains(std::string(lowercase_token));
}

bool FunctionWordDetector::IsEnglish(std::string_view cleaned_text) const {
  size_t non_space = 0;
  size_t latin = 0;
  for (char32_t cp : utf8::Decode(cleaned_text)) {
    if (u_isUWhiteSpace(static_cast<UChar32>(cp))) continue;
    ++non_space;
    if (cp < 0x80) ++latin;
  }
  if (non_space == 0 || latin * 5 < non_space * 4) return false;
  for (const std::string& token : SplitWhitespace(cleaned_text)) {
    if (IsStopWord(utf8::ToLower(token))) return true;
  }
  return false;
}

std::string_view DropReasonName(DropReason reason) {
  return reason == DropReason::kTooShort ? "too_short" : "non_english";
}

FilterResult FilterReviews(const std::vector<Review>& reviews, int min_words,
                           const LanguageDetector* detector) {
  if (min_words < 1) throw UsageError("min_words must be >= 1");
  static const FunctionWordDetector kDefaultDetector;
  if (detector == nullptr) detector = &kDefaultDetector;
  FilterResult result;
  for (const Review& review : reviews) {
    Review cleaned = review;
    cleaned.body = CleanText(review.raw_body);
    if (SplitWhitespace(cleaned.body).size() <
        static_cast<size_t>(min_words)) {
      result.dropped.push_back({review.id, DropReason::kTooShort});
    } else if (!detector->IsEnglish(cleaned.body)) {
      result.dropped.push_back({review.id, DropReason::kNonEnglish});
    } else {
      result.kept.push_back(std::move(cleaned));
    }
  }
  return result;
}

double ZValue(double confidence) {
  static constexpr std::pair<double, double> kTable[] = {
      {0.90, 1.645}, {0.95, 1.96}, {0.99, 2.575}};
  for (auto [level, z] : kTable) {
    if (std::abs(confidence - level) < 1e-12) return z;
  }
  throw UsageError("unsupported confidence level " +
                   std::to_string(confidence) +
                   " (supported: 0.90, 0.95, 0.99)");
}

SampleSpec::SampleSpec(double confidence, double margin,
                       std::optional<int64_t> population)
    : confidence_(confidence),
      margin_(margin),
      population_(population),
      z_value_(ZValue(confidence)) {
  if (!(margin > 0.0 && margin < 1.0)) {
    throw UsageError("margin must lie in (0, 1)");
  }
  if (population && *population <= 0) {
    throw UsageError("population must be positive");
  }
}

int64_t SampleSize(const SampleSpec& spec) {
  const double z = spec.z_value();
  const double n0 = z * z * 0.25 / (spec.margin() * spec.margin());
  double n = n0;
  if (spec.population()) {
    n = n0 / (1.0 + (n0 - 1.0) / static_cast<double>(*spec.population()));
  }
  // Absorb representation error so exact integers do not round up.
  auto size = static_cast<int64_t>(std::ceil(n - 1e-9));
  return std::max<int64_t>(size, 1);
}

std::vector<Review> DrawSample(const std::vector<Review>& reviews, size_t n,
                               uint64_t seed,
                               std::optional<size_t> per_app_cap) {
  if (n == 0) return {};
  Rng rng(seed);
  std::vector<size_t> pool;
  if (per_app_cap) {
    std::vector<std::string> app_order;
    std::unordered_map<std::string, std::vector<size_t>> by_app;
    for (size_t i = 0; i < reviews.size(); ++i) {
      auto [it, inserted] = by_app.try_emplace(reviews[i].app_id);
      if (inserted) app_order.push_back(reviews[i].app_id);
      it->second.push_back(i);
    }
    for (const std::string& app : app_order) {
      std::vector<size_t>& members = by_app[app];
      rng.Shuffle(members);
      if (members.size() > *per_app_cap) members.resize(*per_app_cap);
      pool.insert(pool.end(), members.begin(), members.end());
    }
  } else {
    pool.resize(reviews.size());
    for (size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  }
  if (n > pool.size()) {
    throw DataError("sample of " + std::to_string(n) + " requested but only " +
                    std::to_string(pool.size()) + " reviews available");
  }
  std::vector<size_t> chosen;
  chosen.reserve(n);
  for (size_t pick : rng.SampleIndices(pool.size(), n)) {
    chosen.push_back(pool[pick]);
  }
  std::sort(chosen.begin(), chosen.end());
  std::vector<Review> sample;
  sample.reserve(n);
  for (size_t i : chosen) sample.push_back(reviews[i]);
  return sample;
}

std::vector<LabeledReview> ParseLabelsJsonl(std::string_view content) {
  std::vector<LabeledReview> out;
  std::map<std::string, size_t> seen;
  size_t row = 0;
  size_t start = 0;
  while (start <= content.size()) {
    size_t end = content.find('\n', start);
    if (end == std::string_view::npos) end = content.size();
    std::string_view line = content.substr(start, end - start);
    start = end + 1;
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) {
      if (end == content.size()) break;
      continue;
    }
    LabeledReview r;
    try {
      const nlohmann::json j = nlohmann::json::parse(line);
      r.review_id = j.at("review_id").get<std::string>();
      for (const auto& l : j.value("labels", nlohmann::json::array())) {
        r.labels.push_back({l.at("coder_id").get<std::string>(),
                            ParseLabel(l.at("label").get<std::string>())});
      }
      r.final_label =
          ParseFinalLabel(j.value("final_label", std::string("unresolved")));
    } catch (const nlohmann::json::exception& e) {
      throw DataError("labels row " + std::to_string(row) + ": " + e.what());
    } catch (const DataError& e) {
      throw DataError("labels row " + std::to_string(row) + ": " + e.what());
    }
    if (auto [it, fresh] = seen.emplace(r.review_id, row); !fresh) {
      throw DataError("labels row " + std::to_string(row) + ": duplicate id '" +
                      r.review_id + "' (first seen at row " +
                      std::to_string(it->second) + ")");
    }
    out.push_back(std::move(r));
    if (end == content.size()) break;
  }
  return out;
}

std::vector<LabeledReview> LoadLabels(const std::filesystem::path& path) {
  return ParseLabelsJsonl(ReadFile(path));
}

std::string LabelsToJsonl(const std::vector<LabeledReview>& labels) {
  std::string out;
  for (const LabeledReview& r : labels) {
    ordered_json j;
    j["review_id"] = r.review_id;
    j["labels"] = ordered_json::array();
    for (const CoderLabel& l : r.labels) {
      j["labels"].push_back(
          {{"coder_id", l.coder_id}, {"label", LabelName(l.label)}});
    }
    j["final_label"] = FinalLabelName(r.final_label);
    out += j.dump();
    out += '\n';
  }
  return out;
}

}  // namespace cmine::corpus

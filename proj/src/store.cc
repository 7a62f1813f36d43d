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

#include "cmine/store.h"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <set>
#include <sstream>

namespace cmine::store {

using nlohmann::json;

std::vector<corpus::LabeledReview> AnnotationState::LabelList() const {
  std::vector<corpus::LabeledReview> out;
  out.reserve(labels.size());
  for (const auto& [id, r] : labels) out.push_back(r);
  return out;
}

json LabelEvent(const std::string& review_id, const std::string& coder_id,
                Label label) {
  return {{"type", "label"},
          {"review_id", review_id},
          {"coder_id", coder_id},
          {"label", LabelName(label)}};
}

json ResolveEvent(const std::string& review_id, Label final_label) {
  return {{"type", "resolve"},
          {"review_id", review_id},
          {"final_label", LabelName(final_label)}};
}

json TopicEvent(int cluster_id, const std::string& name,
                const std::string& coder_id) {
  return {{"type", "topic"},
          {"cluster_id", cluster_id},
          {"name", name},
          {"coder_id", coder_id}};
}

json MergeEvent(const std::vector<int>& cluster_ids, const std::string& name,
                const std::string& coder_id) {
  return {{"type", "merge"},
          {"ids", cluster_ids},
          {"name", name},
          {"coder_id", coder_id}};
}

namespace {

std::string Text(const json& event, const char* field) {
  auto it = event.find(field);
  if (it == event.end() || !it->is_string() || it->get<std::string>().empty()) {
    throw UsageError(std::string("field '") + field +
                     "' must be a non-empty string");
  }
  return it->get<std::string>();
}

Label LabelField(const json& event, const char* field) {
  try {
    return ParseLabel(Text(event, field));
  } catch (const DataError& e) {
    throw UsageError(e.what());
  }
}

bool Disagrees(const corpus::LabeledReview& r) {
  return std::any_of(r.labels.begin(), r.labels.end(),
                     [&](const auto& l) { return l.label != r.labels[0].label; });
}

// Recomputes the final label after the coder labels changed. A recorded
// resolution survives only while the disagreement it settled persists.
void Settle(corpus::LabeledReview& review, bool was_resolution) {
  const corpus::FinalLabel previous = review.final_label;
  review.final_label = corpus::FinalLabel::kUnresolved;
  review.final_label =
      evaluate::ResolveDisagreements({review}, {})[0].final_label;
  if (was_resolution && Disagrees(review) &&
      review.final_label == corpus::FinalLabel::kUnresolved) {
    review.final_label = previous;
  }
}

}  // namespace

void Apply(AnnotationState& state, const json& event) {
  if (!event.is_object()) throw UsageError("event must be a JSON object");
  const std::string type = Text(event, "type");
  if (type == "label") {
    const std::string review_id = Text(event, "review_id");
    const std::string coder_id = Text(event, "coder_id");
    const Label label = LabelField(event, "label");
    corpus::LabeledReview& r = state.labels[review_id];
    r.review_id = review_id;
    const bool was_resolution =
        !r.labels.empty() && Disagrees(r) &&
        r.final_label != corpus::FinalLabel::kUnresolved;
    auto it = std::find_if(r.labels.begin(), r.labels.end(),
                           [&](const auto& l) { return l.coder_id == coder_id; });
    if (it != r.labels.end()) {
      it->label = label;
    } else {
      r.labels.push_back({coder_id, label});
    }
    Settle(r, was_resolution);
  } else if (type == "resolve") {
    const std::string review_id = Text(event, "review_id");
    const Label label = LabelField(event, "final_label");
    auto it = state.labels.find(review_id);
    if (it == state.labels.end()) {
      throw UsageError("review '" + review_id + "' has no labels");
    }
    evaluate::Resolution res{review_id, label};
    try {
      it->second = evaluate::ResolveDisagreements({it->second}, {&res, 1})[0];
    } catch (const DataError& e) {
      throw UsageError(e.what());
    }
  } else if (type == "topic" || type == "merge") {
    if (!state.topics) throw UsageError("no clustering to annotate");
    const std::string name = Text(event, "name");
    const std::string coder_id = event.value("coder_id", std::string());
    if (type == "topic") {
      if (!event.contains("cluster_id") || !event["cluster_id"].is_number_integer()) {
        throw UsageError("field 'cluster_id' must be an integer");
      }
      state.topics->Name(event["cluster_id"].get<int>(), name, coder_id);
    } else {
      if (!event.contains("ids") || !event["ids"].is_array()) {
        throw UsageError("field 'ids' must be an array of cluster ids");
      }
      std::vector<int> ids;
      for (const json& id : event["ids"]) {
        if (!id.is_number_integer()) throw UsageError("cluster ids must be integers");
        ids.push_back(id.get<int>());
      }
      state.topics->Merge(ids, name, coder_id);
    }
  } else {
    throw UsageError("unknown event type '" + type + "'");
  }
}

evaluate::AgreementReport Agreement(const AnnotationState& state,
                                    std::vector<std::string>* coders_out) {
  std::set<std::string> coder_set;
  for (const auto& [id, r] : state.labels) {
    for (const auto& l : r.labels) coder_set.insert(l.coder_id);
  }
  std::vector<std::string> coders(coder_set.begin(), coder_set.end());
  if (coders.size() > 2) coders.resize(2);
  if (coders_out) *coders_out = coders;
  evaluate::AgreementReport empty;
  if (coders.size() < 2) return empty;
  std::vector<Label> a, b;
  std::vector<std::string> ids;
  for (const auto& [id, r] : state.labels) {
    std::optional<Label> la, lb;
    for (const auto& l : r.labels) {
      if (l.coder_id == coders[0]) la = l.label;
      if (l.coder_id == coders[1]) lb = l.label;
    }
    if (la && lb) {
      a.push_back(*la);
      b.push_back(*lb);
      ids.push_back(id);
    }
  }
  if (a.empty()) return empty;
  return evaluate::CohenKappa(a, b, ids);
}

std::vector<corpus::LabeledReview> OpenDisagreements(
    const AnnotationState& state) {
  std::vector<corpus::LabeledReview> out;
  for (const auto& [id, r] : state.labels) {
    if (r.final_label != corpus::FinalLabel::kUnresolved) continue;
    if (Disagrees(r)) out.push_back(r);
  }
  return out;
}

Journal::Journal(std::filesystem::path path) : path_(std::move(path)) {}

std::vector<json> Journal::ReadAll() const {
  std::vector<json> events;
  std::ifstream in(path_, std::ios::binary);
  if (!in) return events;
  std::string line;
  size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      events.push_back(json::parse(line));
    } catch (const json::exception&) {
      // A torn final line (crash mid-append) is ignored; anything else is
      // corruption.
      if (in.peek() == std::char_traits<char>::eof()) break;
      throw DataError("corrupt journal " + path_.string() + " at line " +
                      std::to_string(row));
    }
  }
  return events;
}

void Journal::Append(const json& event) {
  std::lock_guard<std::mutex> lock(mutex_);
  const std::string line = event.dump() + "\n";
  const int fd = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd < 0) throw DataError("cannot open journal " + path_.string());
  size_t written = 0;
  while (written < line.size()) {
    const ssize_t n = ::write(fd, line.data() + written, line.size() - written);
    if (n < 0) {
      ::close(fd);
      throw DataError("cannot append to journal " + path_.string());
    }
    written += static_cast<size_t>(n);
  }
  ::fsync(fd);
  ::close(fd);
}

AnnotationState Replay(AnnotationState initial, const std::vector<json>& events,
                       std::vector<std::string>* skipped) {
  for (const json& e : events) {
    AnnotationState next = initial;
    try {
      Apply(next, e);
      initial = std::move(next);
    } catch (const Error& err) {
      if (skipped) skipped->push_back(e.dump() + ": " + err.what());
    }
  }
  return initial;
}

}  // namespace cmine::store

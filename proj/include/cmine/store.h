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

// Human annotations (coder labels, resolutions, topic names and merges)
// kept as an append-only JSONL journal and replayed into an in-memory state.

#ifndef CMINE_STORE_H_
#define CMINE_STORE_H_

#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "cmine/cluster.h"
#include "cmine/corpus.h"
#include "cmine/evaluate.h"
#include "json.hpp"

namespace cmine::store {

struct AnnotationState {
  std::map<std::string, corpus::LabeledReview> labels;
  // Present once a clustering exists.
  std::optional<cluster::TopicRegistry> topics;

  std::vector<corpus::LabeledReview> LabelList() const;
};

// Journal event constructors.
nlohmann::json LabelEvent(const std::string& review_id,
                          const std::string& coder_id, Label label);
nlohmann::json ResolveEvent(const std::string& review_id, Label final_label);
nlohmann::json TopicEvent(int cluster_id, const std::string& name,
                          const std::string& coder_id);
nlohmann::json MergeEvent(const std::vector<int>& cluster_ids,
                          const std::string& name, const std::string& coder_id);

// Applies one event. A coder relabeling a review replaces their earlier
// label. Throws UsageError for an invalid event; the state is unchanged then.
void Apply(AnnotationState& state, const nlohmann::json& event);

// Agreement between the first two coders (by coder id) over the reviews
// both labeled. kappa is unset when no review has two labels.
evaluate::AgreementReport Agreement(const AnnotationState& state,
                                    std::vector<std::string>* coders = nullptr);

// Reviews whose coders disagree and that have no final label yet.
std::vector<corpus::LabeledReview> OpenDisagreements(
    const AnnotationState& state);

// Append-only journal file. Append writes one line and flushes it to disk
// before returning.
class Journal {
 public:
  explicit Journal(std::filesystem::path path);

  const std::filesystem::path& path() const { return path_; }
  // All events in order; a missing file reads as empty.
  std::vector<nlohmann::json> ReadAll() const;
  void Append(const nlohmann::json& event);

 private:
  std::filesystem::path path_;
  std::mutex mutex_;
};

// Replays events on top of an initial state. Events that no longer apply
// (e.g. to a clustering that was recomputed) are reported through skipped.
AnnotationState Replay(AnnotationState initial,
                       const std::vector<nlohmann::json>& events,
                       std::vector<std::string>* skipped = nullptr);

}  // namespace cmine::store

#endif  // CMINE_STORE_H_

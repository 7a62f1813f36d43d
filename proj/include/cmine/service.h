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

// Local JSON-over-HTTP service for labeling and cluster triage.
//
//   GET  /api/v1/health
//   GET  /api/v1/labeling/next?coder=ID
//   POST /api/v1/labeling/labels        {review_id, coder_id, label}
//   GET  /api/v1/labeling/agreement
//   GET  /api/v1/labeling/disagreements
//   POST /api/v1/labeling/resolve       {review_id, final_label}
//   GET  /api/v1/clusters
//   GET  /api/v1/clusters/{id}/top?n=30
//   POST /api/v1/clusters/{id}/topic    {name, coder_id}
//   POST /api/v1/clusters/merge         {ids, name}
//   GET  /api/v1/report
//
// Errors are {"error": {"code", "message"}} with a 4xx/5xx status. Every
// mutation is appended to the output directory's journal before it becomes
// visible; reads work on immutable snapshots.

#ifndef CMINE_SERVICE_H_
#define CMINE_SERVICE_H_

#include <memory>
#include <string>

#include "cmine/pipeline.h"
#include "cmine/store.h"

namespace cmine::service {

class Service {
 public:
  // Loads artifacts and replays the journal. Throws DataError when neither
  // a labeling batch, a labels file nor a clustering exists.
  explicit Service(pipeline::PipelineConfig config);
  ~Service();

  // Binds the listening socket; port 0 picks a free port. Returns the bound
  // port. Throws UsageError when the port is busy.
  int Bind(const std::string& host, int port);
  // Serves until Stop() is called.
  void Listen();
  void Stop();

  std::shared_ptr<const store::AnnotationState> Snapshot() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace cmine::service

#endif  // CMINE_SERVICE_H_

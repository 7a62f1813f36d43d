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

#include "cmine/service.h"

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <unordered_map>

#include "httplib.h"
#include "json.hpp"

namespace cmine::service {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Raised inside handlers; carries the HTTP status and error code.
struct HttpError {
  int status;
  std::string code;
  std::string message;
};

[[noreturn]] void Fail(int status, std::string code, std::string message) {
  throw HttpError{status, std::move(code), std::move(message)};
}

void Send(httplib::Response& res, int status, const json& body) {
  res.status = status;
  res.set_content(body.dump(), "application/json; charset=utf-8");
}

json ParseBody(const httplib::Request& req) {
  try {
    json j = json::parse(req.body);
    if (!j.is_object()) Fail(400, "bad_request", "request body must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    Fail(400, "bad_request", std::string("malformed JSON: ") + e.what());
  }
}

std::string RequiredText(const json& j, const char* field) {
  auto it = j.find(field);
  if (it == j.end() || !it->is_string() || it->get<std::string>().empty()) {
    Fail(400, "bad_request",
         std::string("field '") + field + "' must be a non-empty string");
  }
  return it->get<std::string>();
}

json LabeledJson(const corpus::LabeledReview& r) {
  json labels = json::array();
  for (const auto& l : r.labels) {
    labels.push_back({{"coder_id", l.coder_id}, {"label", LabelName(l.label)}});
  }
  return {{"review_id", r.review_id},
          {"labels", labels},
          {"final_label", corpus::FinalLabelName(r.final_label)}};
}

}  // namespace

struct Service::Impl {
  pipeline::PipelineConfig config;
  store::Journal journal;
  std::unordered_map<std::string, corpus::Review> reviews;
  std::vector<std::string> queue;  // labeling order
  std::optional<pipeline::ClusteringArtifact> clustering;

  mutable std::mutex state_mutex;  // guards the pointer swap only
  std::mutex write_mutex;          // serializes writers
  std::shared_ptr<const store::AnnotationState> state;

  httplib::Server server;

  explicit Impl(pipeline::PipelineConfig c)
      : config(std::move(c)),
        journal(config.output_dir / pipeline::artifacts::kJournal) {}

  std::shared_ptr<const store::AnnotationState> Load() const {
    std::lock_guard<std::mutex> lock(state_mutex);
    return state;
  }

  void Publish(std::shared_ptr<const store::AnnotationState> next) {
    std::lock_guard<std::mutex> lock(state_mutex);
    state = std::move(next);
  }

  // Validates the event on a copy, journals it, then publishes the copy.
  std::shared_ptr<const store::AnnotationState> Mutate(const json& event) {
    std::lock_guard<std::mutex> lock(write_mutex);
    auto next = std::make_shared<store::AnnotationState>(*Load());
    try {
      store::Apply(*next, event);
    } catch (const UsageError& e) {
      Fail(400, "bad_request", e.what());
    }
    journal.Append(event);
    Publish(next);
    return next;
  }

  void CheckCluster(int id, bool must_be_compact) const {
    if (!clustering) Fail(404, "no_clustering", "no clustering artifact; run 'cluster' first");
    if (!clustering->sizes.contains(id)) {
      Fail(404, "unknown_cluster", "unknown cluster id " + std::to_string(id));
    }
    if (must_be_compact && !clustering->topics.IsCompact(id)) {
      Fail(409, "cluster_excluded",
           "cluster " + std::to_string(id) +
               " is excluded (not compact) and cannot be annotated");
    }
  }

  json ClusterList(const store::AnnotationState& s) const {
    json clusters = json::array();
    for (const auto& [id, size] : clustering->sizes) {
      clusters.push_back({{"cluster_id", id},
                          {"size", size},
                          {"mean_silhouette", clustering->mean_silhouette.at(id)},
                          {"compact", clustering->topics.IsCompact(id)},
                          {"concern", s.topics->ConcernOf(id)}});
    }
    return clusters;
  }

  json AgreementJson(const store::AnnotationState& s) const {
    std::vector<std::string> coders;
    evaluate::AgreementReport report = store::Agreement(s, &coders);
    json j = report.ToJson();
    j["coders"] = coders;
    size_t compared = 0;
    if (coders.size() == 2) {
      for (const auto& [id, r] : s.labels) {
        bool a = false, b = false;
        for (const auto& l : r.labels) {
          a = a || l.coder_id == coders[0];
          b = b || l.coder_id == coders[1];
        }
        compared += a && b;
      }
    }
    j["reviews_compared"] = compared;
    return j;
  }

  void Routes();
};

void Service::Impl::Routes() {
  auto wrap = [](auto handler) {
    return [handler](const httplib::Request& req, httplib::Response& res) {
      try {
        handler(req, res);
      } catch (const HttpError& e) {
        Send(res, e.status, {{"error", {{"code", e.code}, {"message", e.message}}}});
      } catch (const DataError& e) {
        Send(res, 500, {{"error", {{"code", "data_error"}, {"message", e.what()}}}});
      } catch (const std::exception& e) {
        Send(res, 500, {{"error", {{"code", "internal"}, {"message", e.what()}}}});
      }
    };
  };

  server.Get("/api/v1/health", wrap([](const auto&, auto& res) {
               Send(res, 200, {{"status", "ok"}});
             }));

  server.Get("/api/v1/labeling/next", wrap([this](const auto& req, auto& res) {
               const std::string coder = req.get_param_value("coder");
               if (coder.empty()) Fail(400, "bad_request", "query parameter 'coder' is required");
               auto s = Load();
               json review = nullptr;
               size_t remaining = 0;
               for (const std::string& id : queue) {
                 auto it = s->labels.find(id);
                 bool done = false;
                 if (it != s->labels.end()) {
                   for (const auto& l : it->second.labels) done = done || l.coder_id == coder;
                 }
                 if (done) continue;
                 ++remaining;
                 if (review.is_null()) {
                   const corpus::Review& r = reviews.at(id);
                   review = {{"review_id", r.id},
                             {"app_id", r.app_id},
                             {"category", r.category},
                             {"body", r.body}};
                 }
               }
               Send(res, 200, {{"coder_id", coder},
                               {"review", review},
                               {"remaining", remaining}});
             }));

  server.Post("/api/v1/labeling/labels", wrap([this](const auto& req, auto& res) {
                const json body = ParseBody(req);
                const std::string review_id = RequiredText(body, "review_id");
                const std::string coder_id = RequiredText(body, "coder_id");
                const std::string label = RequiredText(body, "label");
                if (!reviews.empty() && !reviews.contains(review_id)) {
                  Fail(404, "unknown_review", "unknown review '" + review_id + "'");
                }
                Label parsed;
                try {
                  parsed = ParseLabel(label);
                } catch (const DataError& e) {
                  Fail(400, "bad_request", e.what());
                }
                auto s = Mutate(store::LabelEvent(review_id, coder_id, parsed));
                Send(res, 200, LabeledJson(s->labels.at(review_id)));
              }));

  server.Get("/api/v1/labeling/agreement", wrap([this](const auto&, auto& res) {
               Send(res, 200, AgreementJson(*Load()));
             }));

  server.Get("/api/v1/labeling/disagreements",
             wrap([this](const auto&, auto& res) {
               json list = json::array();
               for (const auto& r : store::OpenDisagreements(*Load())) {
                 list.push_back(LabeledJson(r));
               }
               Send(res, 200, {{"disagreements", list}});
             }));

  server.Post("/api/v1/labeling/resolve", wrap([this](const auto& req, auto& res) {
                const json body = ParseBody(req);
                const std::string review_id = RequiredText(body, "review_id");
                const std::string final_label = RequiredText(body, "final_label");
                Label parsed;
                try {
                  parsed = ParseLabel(final_label);
                } catch (const DataError& e) {
                  Fail(400, "bad_request", e.what());
                }
                auto s = Load();
                auto it = s->labels.find(review_id);
                if (it == s->labels.end()) {
                  Fail(404, "unknown_review", "review '" + review_id + "' has no labels");
                }
                const auto& labels = it->second.labels;
                const bool disagree = std::any_of(
                    labels.begin(), labels.end(),
                    [&](const auto& l) { return l.label != labels[0].label; });
                if (!disagree) {
                  Fail(409, "no_disagreement",
                       "review '" + review_id + "' has no disagreement to resolve");
                }
                auto next = Mutate(store::ResolveEvent(review_id, parsed));
                Send(res, 200, LabeledJson(next->labels.at(review_id)));
              }));

  server.Get("/api/v1/clusters", wrap([this](const auto&, auto& res) {
               if (!clustering) Fail(404, "no_clustering", "no clustering artifact; run 'cluster' first");
               Send(res, 200, {{"k", clustering->k}, {"clusters", ClusterList(*Load())}});
             }));

  server.Get(R"(/api/v1/clusters/(-?\d+)/top)", wrap([this](const auto& req, auto& res) {
               const int id = std::stoi(req.matches[1]);
               CheckCluster(id, true);
               int n = 30;
               if (req.has_param("n")) {
                 try {
                   n = std::stoi(req.get_param_value("n"));
                 } catch (const std::exception&) {
                   n = 0;
                 }
                 if (n < 1) Fail(400, "bad_request", "n must be a positive integer");
               }
               auto s = Load();
               json top = json::array();
               for (const auto& summary : clustering->summaries) {
                 if (summary.cluster_id != id) continue;
                 for (const auto& r : summary.top) {
                   if (top.size() >= static_cast<size_t>(n)) break;
                   top.push_back({{"review_id", r.review_id},
                                  {"silhouette", r.silhouette},
                                  {"body", r.body}});
                 }
               }
               Send(res, 200, {{"cluster_id", id},
                               {"concern", s->topics->ConcernOf(id)},
                               {"reviews", top}});
             }));

  server.Post(R"(/api/v1/clusters/(-?\d+)/topic)", wrap([this](const auto& req, auto& res) {
                const int id = std::stoi(req.matches[1]);
                const json body = ParseBody(req);
                const std::string name = RequiredText(body, "name");
                const std::string coder = body.value("coder_id", std::string());
                CheckCluster(id, true);
                auto s = Mutate(store::TopicEvent(id, name, coder));
                Send(res, 200, {{"cluster_id", id}, {"concern", s->topics->ConcernOf(id)}});
              }));

  server.Post("/api/v1/clusters/merge", wrap([this](const auto& req, auto& res) {
                const json body = ParseBody(req);
                const std::string name = RequiredText(body, "name");
                if (!body.contains("ids") || !body["ids"].is_array() ||
                    body["ids"].size() < 2) {
                  Fail(400, "bad_request", "field 'ids' must list at least two cluster ids");
                }
                std::vector<int> ids;
                for (const json& v : body["ids"]) {
                  if (!v.is_number_integer()) Fail(400, "bad_request", "cluster ids must be integers");
                  ids.push_back(v.get<int>());
                  CheckCluster(ids.back(), true);
                }
                auto s = Mutate(store::MergeEvent(ids, name, body.value("coder_id", std::string())));
                Send(res, 200, {{"ids", ids}, {"concern", name}, {"topics", s->topics->ToJson()}});
              }));

  server.Get("/api/v1/report", wrap([this](const auto&, auto& res) {
               if (!clustering) Fail(404, "no_clustering", "no clustering artifact; run 'cluster' first");
               auto s = Load();
               std::vector<corpus::Review> list;
               list.reserve(reviews.size());
               for (const auto& [id, r] : reviews) list.push_back(r);
               std::sort(list.begin(), list.end(),
                         [](const auto& a, const auto& b) { return a.id < b.id; });
               report::ConcernFrequencyTable table = report::ComputeConcernFrequency(
                   clustering->assignments, *s->topics, list);
               Send(res, 200, {{"concern_frequency", table.ToJson()},
                               {"clusters", ClusterList(*s)},
                               {"topics", s->topics->ToJson()},
                               {"agreement", AgreementJson(*s)}});
             }));
}

Service::Service(pipeline::PipelineConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {
  Impl& m = *impl_;
  const fs::path dir = m.config.output_dir;
  fs::create_directories(dir);
  const fs::path clean = dir / pipeline::artifacts::kCleanReviews;
  if (fs::exists(clean)) {
    for (corpus::Review& r : corpus::ParseJsonl(pipeline::ReadFile(clean))) {
      m.reviews.emplace(r.id, std::move(r));
    }
  }
  const fs::path batch = dir / pipeline::artifacts::kLabelingBatch;
  if (fs::exists(batch)) {
    for (corpus::Review& r : corpus::ParseJsonl(pipeline::ReadFile(batch))) {
      m.queue.push_back(r.id);
      m.reviews.try_emplace(r.id, std::move(r));
    }
  }
  store::AnnotationState initial = pipeline::InitialAnnotations(m.config);
  if (m.queue.empty()) {
    for (const auto& [id, l] : initial.labels) {
      if (m.reviews.contains(id)) m.queue.push_back(id);
    }
  }
  if (fs::exists(dir / pipeline::artifacts::kClusters)) {
    m.clustering = pipeline::LoadClustering(dir);
  }
  if (m.queue.empty() && !m.clustering && initial.labels.empty()) {
    throw DataError(
        "nothing to serve: run 'bootstrap' (labeling batch) or 'cluster' first");
  }
  m.state = std::make_shared<const store::AnnotationState>(
      store::Replay(std::move(initial), m.journal.ReadAll()));
  // httplib's default adds SO_REUSEPORT, which lets a second server share a
  // port that is already in use.
  m.server.set_socket_options([](socket_t sock) {
    int yes = 1;
    ::setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof(yes));
  });
  m.Routes();
}

Service::~Service() { Stop(); }

int Service::Bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw UsageError("cannot bind to " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw UsageError("port " + std::to_string(port) + " on " + host +
                     " is busy or unavailable");
  }
  return port;
}

void Service::Listen() { impl_->server.listen_after_bind(); }

void Service::Stop() {
  if (impl_) impl_->server.stop();
}

std::shared_ptr<const store::AnnotationState> Service::Snapshot() const {
  return impl_->Load();
}

}  // namespace cmine::service

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


#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <memory>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "cmine/service.h"
#include "cmine/synthetic.h"
#include "doctest.h"
#include "httplib.h"
#include "support.h"

namespace cmine::service {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using testing::ReadText;
using testing::TempDir;
using testing::WriteText;

// One pipeline run shared by every test; each test serves a fresh copy of
// the output directory so journals do not leak between tests.
const fs::path& PipelineOutput() {
  static TempDir dir;
  static const fs::path out = [] {
    synthetic::SyntheticConfig sc;
    sc.num_reviews = 1500;
    synthetic::WriteCorpus(synthetic::Generate(sc), dir.path());
    json config = json::parse(ReadText(dir / "config.json"));
    config["cluster"]["restarts"] = 10;
    config["cluster"]["k_max"] = 5;
    WriteText(dir / "config.json", config.dump(2));
    pipeline::Pipeline p(pipeline::PipelineConfig::Load(dir / "config.json"));
    p.RunAll();
    return dir / "out";
  }();
  return out;
}

class Server {
 public:
  explicit Server(const fs::path& output_dir) {
    fs::copy(PipelineOutput(), output_dir, fs::copy_options::recursive);
    config_.output_dir = output_dir;
    service_ = std::make_unique<Service>(config_);
    port_ = service_->Bind("127.0.0.1", 0);
    thread_ = std::thread([this] { service_->Listen(); });
    client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
    for (int i = 0; i < 100 && !client_->Get("/api/v1/health"); ++i) {
      std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
  }
  ~Server() {
    service_->Stop();
    thread_.join();
  }

  int port() const { return port_; }
  Service& service() { return *service_; }
  const pipeline::PipelineConfig& config() const { return config_; }

  std::pair<int, json> Get(const std::string& path) {
    auto res = client_->Get(path);
    REQUIRE(res);
    return {res->status, json::parse(res->body)};
  }
  std::pair<int, json> Post(const std::string& path, const std::string& body) {
    auto res = client_->Post(path, body, "application/json");
    REQUIRE(res);
    return {res->status, json::parse(res->body)};
  }
  std::pair<int, json> Post(const std::string& path, const json& body) {
    return Post(path, body.dump());
  }

 private:
  pipeline::PipelineConfig config_;
  std::unique_ptr<Service> service_;
  int port_ = 0;
  std::thread thread_;
  std::unique_ptr<httplib::Client> client_;
};

std::vector<std::string> BatchIds(const fs::path& out) {
  std::vector<std::string> ids;
  for (const corpus::Review& r : corpus::ParseJsonl(
           ReadText(out / pipeline::artifacts::kLabelingBatch))) {
    ids.push_back(r.id);
  }
  return ids;
}

TEST_CASE("health and labeling queue") {
  TempDir dir;
  Server s(dir / "out");
  auto [status, body] = s.Get("/api/v1/health");
  CHECK(status == 200);
  CHECK(body["status"] == "ok");

  auto [missing, error] = s.Get("/api/v1/labeling/next");
  CHECK(missing == 400);
  CHECK(error["error"]["code"] == "bad_request");

  const std::vector<std::string> ids = BatchIds(dir / "out");
  REQUIRE(ids.size() >= 2);
  auto [ok, next] = s.Get("/api/v1/labeling/next?coder=ann");
  CHECK(ok == 200);
  CHECK(next["review"]["review_id"] == ids[0]);
  CHECK(next["remaining"] == ids.size());
  s.Post("/api/v1/labeling/labels",
         json{{"review_id", ids[0]}, {"coder_id", "ann"}, {"label", "fairness"}});
  auto [ok2, after] = s.Get("/api/v1/labeling/next?coder=ann");
  CHECK(after["review"]["review_id"] == ids[1]);
  CHECK(after["remaining"] == ids.size() - 1);
  // Another coder still starts at the head of the queue.
  CHECK(s.Get("/api/v1/labeling/next?coder=bo").second["review"]["review_id"] ==
        ids[0]);
}

TEST_CASE("label validation") {
  TempDir dir;
  Server s(dir / "out");
  const std::string id = BatchIds(dir / "out")[0];
  CHECK(s.Post("/api/v1/labeling/labels", std::string("{oops")).first == 400);
  CHECK(s.Post("/api/v1/labeling/labels", json{{"review_id", id}}).first == 400);
  CHECK(s.Post("/api/v1/labeling/labels",
               json{{"review_id", id}, {"coder_id", "a"}, {"label", "maybe"}})
            .first == 400);
  CHECK(s.Post("/api/v1/labeling/labels",
               json{{"review_id", "nope"}, {"coder_id", "a"}, {"label", "fairness"}})
            .first == 404);
  CHECK(ReadText(dir / "out" / pipeline::artifacts::kJournal).empty());
}

TEST_CASE("agreement and resolution over HTTP") {
  TempDir dir;
  Server s(dir / "out");
  const std::vector<std::string> ids = BatchIds(dir / "out");
  Rng rng(21);
  std::vector<Label> a, b;
  std::vector<std::string> both;
  for (size_t i = 0; i < 40 && i < ids.size(); ++i) {
    const Label la = rng.UniformDouble() < 0.5 ? Label::kFairness : Label::kNonFairness;
    const Label lb = rng.UniformDouble() < 0.75 ? la
                     : la == Label::kFairness ? Label::kNonFairness
                                              : Label::kFairness;
    CHECK(s.Post("/api/v1/labeling/labels",
                 json{{"review_id", ids[i]}, {"coder_id", "c1"}, {"label", LabelName(la)}})
              .first == 200);
    CHECK(s.Post("/api/v1/labeling/labels",
                 json{{"review_id", ids[i]}, {"coder_id", "c2"}, {"label", LabelName(lb)}})
              .first == 200);
    a.push_back(la);
    b.push_back(lb);
    both.push_back(ids[i]);
  }
  const evaluate::AgreementReport want = evaluate::CohenKappa(a, b, both);
  auto [status, got] = s.Get("/api/v1/labeling/agreement");
  CHECK(status == 200);
  CHECK(got["coders"] == json{"c1", "c2"});
  CHECK(got["reviews_compared"] == both.size());
  REQUIRE(want.kappa.has_value());
  CHECK(got["kappa"].get<double>() == doctest::Approx(*want.kappa).epsilon(1e-12));

  auto [ok, open] = s.Get("/api/v1/labeling/disagreements");
  CHECK(open["disagreements"].size() == want.disagreements.size());
  REQUIRE_FALSE(want.disagreements.empty());
  const std::string disputed = want.disagreements[0];
  auto [resolved, body] = s.Post(
      "/api/v1/labeling/resolve",
      json{{"review_id", disputed}, {"final_label", "fairness"}});
  CHECK(resolved == 200);
  CHECK(body["final_label"] == "fairness");
  CHECK(s.Get("/api/v1/labeling/disagreements").second["disagreements"].size() ==
        want.disagreements.size() - 1);

  std::string agreed;
  for (size_t i = 0; i < a.size(); ++i) {
    if (a[i] == b[i]) agreed = both[i];
  }
  CHECK(s.Post("/api/v1/labeling/resolve",
               json{{"review_id", agreed}, {"final_label", "fairness"}})
            .first == 409);
  CHECK(s.Post("/api/v1/labeling/resolve",
               json{{"review_id", "ghost"}, {"final_label", "fairness"}})
            .first == 404);
}

TEST_CASE("concurrent label posts are all journaled") {
  TempDir dir;
  const std::vector<std::string> ids = BatchIds(PipelineOutput());
  {
    Server s(dir / "out");
    std::vector<std::thread> writers;
    for (int w = 0; w < 8; ++w) {
      writers.emplace_back([&, w] {
        httplib::Client c("127.0.0.1", s.port());
        for (int i = 0; i < 25; ++i) {
          const json body = {{"review_id", ids[i % ids.size()]},
                             {"coder_id", "w" + std::to_string(w)},
                             {"label", i % 3 ? "fairness" : "non_fairness"}};
          auto res = c.Post("/api/v1/labeling/labels", body.dump(), "application/json");
          CHECK((res && res->status == 200));
        }
      });
    }
    for (auto& t : writers) t.join();
    store::Journal journal(dir / "out" / pipeline::artifacts::kJournal);
    CHECK(journal.ReadAll().size() == 200);
    auto snap = s.service().Snapshot();
    size_t labels = 0;
    for (const auto& [id, r] : snap->labels) labels += r.labels.size();
    CHECK(labels == 8 * std::min<size_t>(25, ids.size()));
  }
  // A restarted service replays the journal into the same state.
  pipeline::PipelineConfig config;
  config.output_dir = dir / "out";
  Service again(config);
  size_t labels = 0;
  for (const auto& [id, r] : again.Snapshot()->labels) labels += r.labels.size();
  CHECK(labels == 8 * std::min<size_t>(25, ids.size()));
}

TEST_CASE("cluster triage") {
  TempDir dir;
  Server s(dir / "out");
  auto [status, list] = s.Get("/api/v1/clusters");
  CHECK(status == 200);
  std::vector<int> compact, excluded;
  for (const json& c : list["clusters"]) {
    (c["compact"].get<bool>() ? compact : excluded).push_back(c["cluster_id"]);
  }
  CHECK(list["clusters"].size() == list["k"].get<size_t>());
  REQUIRE(compact.size() >= 2);

  const std::string top = "/api/v1/clusters/" + std::to_string(compact[0]) + "/top";
  auto [ok, reviews] = s.Get(top + "?n=3");
  CHECK(ok == 200);
  CHECK(reviews["reviews"].size() <= 3);
  for (size_t i = 1; i < reviews["reviews"].size(); ++i) {
    CHECK(reviews["reviews"][i - 1]["silhouette"].get<double>() >=
          reviews["reviews"][i]["silhouette"].get<double>());
  }
  CHECK(s.Get(top + "?n=0").first == 400);
  CHECK(s.Get("/api/v1/clusters/99/top").first == 404);
  if (!excluded.empty()) {
    const std::string path =
        "/api/v1/clusters/" + std::to_string(excluded[0]) + "/topic";
    CHECK(s.Post(path, json{{"name", "x"}}).first == 409);
  }

  const std::string topic =
      "/api/v1/clusters/" + std::to_string(compact[0]) + "/topic";
  auto [named, body] = s.Post(topic, json{{"name", "Account bans"}, {"coder_id", "ann"}});
  CHECK(named == 200);
  CHECK(body["concern"] == "Account bans");
  auto [merged, m] = s.Post("/api/v1/clusters/merge",
                            json{{"ids", {compact[0], compact[1]}}, {"name", "Bans"}});
  CHECK(merged == 200);
  CHECK(s.Post("/api/v1/clusters/merge", json{{"ids", {compact[0]}}, {"name", "x"}})
            .first == 400);

  auto [rep, report] = s.Get("/api/v1/report");
  CHECK(rep == 200);
  const json& concerns = report["concern_frequency"]["concerns"];
  CHECK(std::count(concerns.begin(), concerns.end(), json("Bans")) == 1);
  CHECK(std::count(concerns.begin(), concerns.end(), json("Account bans")) == 0);
  int64_t members = 0;
  for (const json& c : report["clusters"]) {
    if (c["concern"] == "Bans") members += c["size"].get<int64_t>();
  }
  const size_t column = std::find(concerns.begin(), concerns.end(), json("Bans")) -
                        concerns.begin();
  CHECK(report["concern_frequency"]["totals"][column].get<int64_t>() == members);
}

TEST_CASE("busy port is a usage error") {
  TempDir dir;
  Server s(dir / "out");
  pipeline::PipelineConfig config;
  config.output_dir = dir / "out";
  Service other(config);
  CHECK_THROWS_AS(other.Bind("127.0.0.1", s.port()), UsageError);

  json cfg = {{"paths", {{"output_dir", (dir / "out").string()}}}};
  WriteText(dir / "config.json", cfg.dump());
  const std::string cmd = std::string(CMINE_CLI_PATH) + " -c '" +
                          (dir / "config.json").string() + "' serve --port " +
                          std::to_string(s.port()) + " > /dev/null 2> '" +
                          (dir / "err.txt").string() + "'";
  const int status = std::system(cmd.c_str());
  CHECK(WIFEXITED(status));
  CHECK(WEXITSTATUS(status) == 1);
  CHECK(ReadText(dir / "err.txt").find("busy") != std::string::npos);
}

TEST_CASE("nothing to serve") {
  TempDir dir;
  pipeline::PipelineConfig config;
  config.output_dir = dir / "empty";
  CHECK_THROWS_AS(Service{config}, DataError);
}

}  // namespace
}  // namespace cmine::service

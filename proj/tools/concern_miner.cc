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

// concern-miner: command-line entry point.
//
// Exit codes: 0 success, 1 usage error, 2 data error.

#include <pthread.h>
#include <signal.h>

#include <cstdlib>
#include <iostream>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "cmine/common.h"
#include "cmine/pipeline.h"
#include "cmine/service.h"
#include "cmine/synthetic.h"

namespace {

constexpr char kPortVariable[] = "CMINE_PORT";

int ResolvePort(int config_port, int flag_port) {
  if (flag_port >= 0) return flag_port;
  if (const char* env = std::getenv(kPortVariable); env && *env) {
    try {
      size_t used = 0;
      const int port = std::stoi(env, &used);
      if (used == std::string(env).size() && port >= 0 && port < 65536) {
        return port;
      }
    } catch (const std::exception&) {
    }
    throw cmine::UsageError(std::string(kPortVariable) + " must be a port number");
  }
  return config_port;
}

int Serve(const cmine::pipeline::PipelineConfig& config, const std::string& host,
          int port) {
  // Termination signals are handled on a dedicated thread so the server
  // can shut down cleanly.
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  cmine::service::Service service(config);
  const int bound = service.Bind(host, port);
  std::cout << "serving on http://" << host << ":" << bound << "/api/v1"
            << std::endl;
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    service.Stop();
  });
  service.Listen();
  pthread_kill(waiter.native_handle(), SIGTERM);
  waiter.join();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mine fairness concerns from app reviews."};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("-c,--config", config_path, "Pipeline config file (JSON)");

  std::vector<CLI::App*> stages;
  for (const std::string& name : cmine::pipeline::StageNames()) {
    stages.push_back(app.add_subcommand(name, "Run the " + name + " stage"));
  }
  CLI::App* run = app.add_subcommand("run", "Run every stage in order");

  std::string host = "127.0.0.1";
  int port = -1;
  CLI::App* serve = app.add_subcommand("serve", "Serve the labeling/triage API");
  serve->add_option("--host", host, "Listen address");
  serve->add_option("--port", port,
                    "Listen port (default: $CMINE_PORT, then the config)");

  std::string synth_out;
  uint64_t synth_seed = 7;
  size_t synth_reviews = 5000;
  CLI::App* synth =
      app.add_subcommand("synth", "Write the synthetic demo corpus");
  synth->add_option("-o,--out", synth_out, "Output directory")->required();
  synth->add_option("--seed", synth_seed, "Generator seed");
  synth->add_option("--reviews", synth_reviews, "Number of reviews");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (synth->parsed()) {
      cmine::synthetic::SyntheticConfig sc;
      sc.seed = synth_seed;
      sc.num_reviews = synth_reviews;
      cmine::synthetic::WriteCorpus(cmine::synthetic::Generate(sc), synth_out);
      std::cout << "wrote synthetic corpus to " << synth_out << "\n";
      return 0;
    }
    if (config_path.empty()) {
      throw cmine::UsageError("--config is required for this command");
    }
    cmine::pipeline::PipelineConfig config =
        cmine::pipeline::PipelineConfig::Load(config_path);
    if (serve->parsed()) {
      return Serve(config, host, ResolvePort(config.port, port));
    }
    cmine::pipeline::Pipeline pipeline(config);
    if (run->parsed()) {
      pipeline.RunAll();
    } else {
      for (size_t i = 0; i < stages.size(); ++i) {
        if (stages[i]->parsed()) pipeline.Run(cmine::pipeline::StageNames()[i]);
      }
    }
    for (const std::string& w : pipeline.warnings()) {
      std::cerr << "warning: " << w << "\n";
    }
    for (const auto& f : pipeline.report_files()) {
      std::cout << "report: " << f.string() << "\n";
    }
    return 0;
  } catch (const cmine::UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const cmine::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

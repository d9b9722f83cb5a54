// Copyright 2026 The hiiforge Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <csignal>
#include <iostream>
#include <memory>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "hiiforge/protocol/http.hpp"
#include "hiiforge/protocol/mock_detector.hpp"
#include "hiiforge/protocol/mock_vlm.hpp"

namespace {

hiiforge::protocol::ServiceServer* g_server = nullptr;

void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

// Serves scripted backends over the wire protocol, for exercising the HTTP
// client path end to end.
int main(int argc, char** argv) {
  using namespace hiiforge;
  CLI::App app{"hiiforge-mock-server: scripted detector/VLM behind /v1/detect, /v1/generate, /v1/logprob"};
  std::optional<std::string> detector_fixture;
  std::optional<std::string> vlm_fixture;
  std::string host = "127.0.0.1";
  int port = 8100;
  app.add_option("--detector", detector_fixture, "MockDetector fixture JSON");
  app.add_option("--vlm", vlm_fixture, "MockVlm fixture JSON");
  app.add_option("--host", host, "Bind address");
  app.add_option("--port", port, "Port");
  CLI11_PARSE(app, argc, argv);

  try {
    std::unique_ptr<protocol::MockDetector> detector;
    std::unique_ptr<protocol::MockVlm> vlm;
    if (detector_fixture) {
      detector = std::make_unique<protocol::MockDetector>(protocol::MockDetector::load(*detector_fixture));
    }
    if (vlm_fixture) vlm = std::make_unique<protocol::MockVlm>(protocol::MockVlm::load(*vlm_fixture));
    if (!detector && !vlm) {
      std::cerr << "nothing to serve: pass --detector and/or --vlm\n";
      return 2;
    }
    protocol::ServiceServer server(detector.get(), vlm.get());
    g_server = &server;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::cerr << "serving on " << host << ":" << port << '\n';
    server.listen(host, port);
    g_server = nullptr;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 0;
}

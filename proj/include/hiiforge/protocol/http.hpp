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

#pragma once

#include <algorithm>
#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <semaphore>
#include <string>
#include <string_view>
#include <thread>

#include "hiiforge/core/error.hpp"
#include "hiiforge/core/json_codec.hpp"
#include "hiiforge/protocol/backend.hpp"
#include "hiiforge/protocol/messages.hpp"
#include "httplib.h"

namespace hiiforge::protocol {

struct HttpClientConfig {
  std::string base_url;  // e.g. "http://127.0.0.1:8100" or "http://host/api"
  int timeout_ms = 60000;
  int max_retries = 3;
  int backoff_initial_ms = 200;
  int backoff_max_ms = 5000;
  int max_in_flight = 4;
  std::optional<std::string> bearer_token;
  // Injected for tests; defaults to std::this_thread::sleep_for.
  std::function<void(std::chrono::milliseconds)> sleep;
};

inline std::string excerpt(std::string_view body, std::size_t limit = 200) {
  if (body.size() <= limit) return std::string(body);
  return std::string(body.substr(0, limit)) + "...";
}

// Delay before retry `attempt` (0-based): initial * 2^attempt, capped.
inline std::chrono::milliseconds backoff_delay(const HttpClientConfig& cfg, int attempt) {
  long long delay = cfg.backoff_initial_ms;
  for (int i = 0; i < attempt && delay < cfg.backoff_max_ms; ++i) delay *= 2;
  return std::chrono::milliseconds(std::min<long long>(delay, cfg.backoff_max_ms));
}

// POSTs JSON with bounded concurrency and retries transport failures and
// 5xx/429 answers with exponential backoff. Requests are idempotent by
// contract, so a retry can never duplicate a side effect.
class HttpTransport {
 public:
  explicit HttpTransport(HttpClientConfig cfg)
      : cfg_(std::move(cfg)),
        slots_(std::make_unique<std::counting_semaphore<1024>>(
            std::clamp(cfg_.max_in_flight, 1, 1024))) {
    if (cfg_.base_url.empty()) throw ConfigError("service URL is empty");
    const auto scheme_end = cfg_.base_url.find("://");
    if (scheme_end == std::string::npos)
      throw ConfigError("service URL needs a scheme: " + cfg_.base_url);
    const auto path_start = cfg_.base_url.find('/', scheme_end + 3);
    origin_ = cfg_.base_url.substr(0, path_start);
    if (path_start != std::string::npos) {
      path_prefix_ = cfg_.base_url.substr(path_start);
      while (!path_prefix_.empty() && path_prefix_.back() == '/') path_prefix_.pop_back();
    }
    if (!cfg_.sleep) cfg_.sleep = [](std::chrono::milliseconds d) { std::this_thread::sleep_for(d); };
  }

  const HttpClientConfig& config() const noexcept { return cfg_; }

  Json post(std::string_view endpoint, const Json& body) {
    const std::string payload = body.dump();
    const std::string path = path_prefix_ + std::string(endpoint);
    std::string last_failure;
    const int attempts = 1 + std::max(0, cfg_.max_retries);
    bool transport_failure = false;
    for (int attempt = 0; attempt < attempts; ++attempt) {
      if (attempt > 0) cfg_.sleep(backoff_delay(cfg_, attempt - 1));
      httplib::Result result = send(path, payload);
      if (!result) {
        transport_failure = true;
        last_failure = httplib::to_string(result.error());
        continue;
      }
      const int status = result->status;
      if (status >= 500 || status == 429) {
        transport_failure = false;
        last_failure = "HTTP " + std::to_string(status) + ": " + excerpt(result->body);
        continue;
      }
      if (status < 200 || status >= 300) {
        throw ProtocolError("POST " + path + " answered HTTP " + std::to_string(status) + ": " +
                            excerpt(result->body));
      }
      try {
        return Json::parse(result->body);
      } catch (const Json::parse_error&) {
        throw ProtocolError("POST " + path + " returned malformed JSON: " + excerpt(result->body));
      }
    }
    const std::string what = "POST " + origin_ + path + " failed after " +
                             std::to_string(attempts) + " attempt(s): " + last_failure;
    if (transport_failure) throw TransportError(what);
    throw ProtocolError(what);
  }

 private:
  httplib::Result send(const std::string& path, const std::string& payload) {
    slots_->acquire();
    struct Release {
      std::counting_semaphore<1024>* s;
      ~Release() { s->release(); }
    } release{slots_.get()};
    httplib::Client client(origin_);
    const auto timeout = std::chrono::milliseconds(cfg_.timeout_ms);
    client.set_connection_timeout(timeout);
    client.set_read_timeout(timeout);
    client.set_write_timeout(timeout);
    if (cfg_.bearer_token) client.set_bearer_token_auth(*cfg_.bearer_token);
    return client.Post(path, payload, "application/json");
  }

  HttpClientConfig cfg_;
  std::string origin_;
  std::string path_prefix_;
  std::unique_ptr<std::counting_semaphore<1024>> slots_;
};

template <class Fn>
auto decode_or_protocol_error(const Json& j, Fn decode) {
  try {
    return decode(j);
  } catch (const ValidationError& e) {
    throw ProtocolError(std::string("response violates schema: ") + e.what() + " in " +
                        excerpt(j.dump()));
  }
}

class HttpDetector final : public Detector {
 public:
  explicit HttpDetector(HttpClientConfig cfg) : transport_(std::move(cfg)) {}

  DetectResponse detect(const DetectRequest& request) override {
    const Json reply = transport_.post("/v1/detect", encode(request));
    return decode_or_protocol_error(reply, decode_detect_response);
  }

 private:
  HttpTransport transport_;
};

class HttpVlm final : public VisionLanguageModel {
 public:
  explicit HttpVlm(HttpClientConfig cfg) : transport_(std::move(cfg)) {}

  GenerateResponse generate(const GenerateRequest& request) override {
    const Json reply = transport_.post("/v1/generate", encode(request));
    return decode_or_protocol_error(reply, decode_generate_response);
  }

  LogprobResponse logprob(const LogprobRequest& request) override {
    const Json reply = transport_.post("/v1/logprob", encode(request));
    return decode_or_protocol_error(reply, decode_logprob_response);
  }

 private:
  HttpTransport transport_;
};

// Serves a Detector and/or VLM over the wire protocol. Status codes:
// 400 malformed JSON or schema violation, 404 endpoint not served,
// 422 backend refused the request (e.g. unscripted mock key),
// 500 backend failure.
class ServiceServer {
 public:
  ServiceServer(Detector* detector, VisionLanguageModel* vlm) : detector_(detector), vlm_(vlm) {
    server_.Post("/v1/detect", [this](const httplib::Request& req, httplib::Response& res) {
      if (!detector_) return reply_error(res, 404, "not_served", "no detector behind this server");
      handle(req, res, [this](const Json& j) {
        return encode(detector_->detect(decode_detect_request(j)));
      });
    });
    server_.Post("/v1/generate", [this](const httplib::Request& req, httplib::Response& res) {
      if (!vlm_) return reply_error(res, 404, "not_served", "no VLM behind this server");
      handle(req, res, [this](const Json& j) {
        return encode(vlm_->generate(decode_generate_request(j)));
      });
    });
    server_.Post("/v1/logprob", [this](const httplib::Request& req, httplib::Response& res) {
      if (!vlm_) return reply_error(res, 404, "not_served", "no VLM behind this server");
      handle(req, res, [this](const Json& j) {
        return encode(vlm_->logprob(decode_logprob_request(j)));
      });
    });
  }

  ~ServiceServer() { stop(); }
  ServiceServer(const ServiceServer&) = delete;
  ServiceServer& operator=(const ServiceServer&) = delete;

  // Binds an ephemeral port and serves on a background thread.
  int start(const std::string& host = "127.0.0.1") {
    port_ = server_.bind_to_any_port(host);
    if (port_ < 0) throw TransportError("cannot bind " + host);
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return port_;
  }

  // Blocks until stop() is called from another thread.
  void listen(const std::string& host, int port) {
    if (!server_.listen(host, port)) throw TransportError("cannot listen on " + host + ":" + std::to_string(port));
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const noexcept { return port_; }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port_); }

 private:
  static void reply_error(httplib::Response& res, int status, std::string_view code,
                          std::string_view message) {
    res.status = status;
    res.set_content(error_body(code, message).dump(), "application/json");
  }

  template <class Fn>
  static void handle(const httplib::Request& req, httplib::Response& res, Fn fn) {
    Json body;
    try {
      body = Json::parse(req.body);
    } catch (const Json::parse_error& e) {
      return reply_error(res, 400, "invalid_json", e.what());
    }
    try {
      res.set_content(fn(body).dump(), "application/json");
      res.status = 200;
    } catch (const ValidationError& e) {
      reply_error(res, 400, "schema", e.what());
    } catch (const ProtocolError& e) {
      reply_error(res, 422, "refused", e.what());
    } catch (const std::exception& e) {
      reply_error(res, 500, "backend_error", e.what());
    }
  }

  Detector* detector_;
  VisionLanguageModel* vlm_;
  httplib::Server server_;
  std::thread thread_;
  int port_ = -1;
};

}  // namespace hiiforge::protocol

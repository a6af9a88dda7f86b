#pragma once

#include <string>
#include <thread>

// Eigen must come first: resolv.h, pulled in by httplib, defines a `_res` macro.
#include "udfsketch/pipeline/service.hpp"

#include <httplib.h>

namespace udfsketch::pipeline {

/// Binds a SessionService to an HTTP listener. Every route is forwarded to
/// SessionService::handle.
class HttpFrontend {
 public:
  explicit HttpFrontend(SessionService& service) : service_(service) {
    auto forward = [this](const httplib::Request& req, httplib::Response& res) {
      const ApiResponse r = service_.handle(req.method, req.path, req.body);
      res.status = r.status;
      res.set_content(r.body, r.content_type);
    };
    server_.Get(".*", forward);
    server_.Post(".*", forward);
    server_.Put(".*", forward);
  }

  ~HttpFrontend() { stop(); }

  /// Binds to `port` (0 picks a free one) and serves on a background thread.
  int start(const std::string& host, int port) {
    const int bound = port == 0 ? server_.bind_to_any_port(host) : (server_.bind_to_port(host, port) ? port : -1);
    if (bound <= 0) fail(ErrorCode::configuration_error, "could not bind " + host + ":" + std::to_string(port));
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
    return bound;
  }

  /// Serves on the calling thread until stopped.
  void run(const std::string& host, int port) {
    if (!server_.listen(host, port))
      fail(ErrorCode::configuration_error, "could not listen on " + host + ":" + std::to_string(port));
  }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

 private:
  SessionService& service_;
  httplib::Server server_;
  std::thread thread_;
};

}  // namespace udfsketch::pipeline

// Copyright 2026 The specjudge Authors
// SPDX-License-Identifier: Apache-2.0

#include "mock_server.hpp"

#include <stdexcept>
#include <thread>

#include <httplib.h>
#include <json.hpp>

namespace specjudge::testing {

struct MockServer::Impl {
  httplib::Server server;
  std::thread thread;
  int port = 0;
};

MockServer::MockServer(Handler handler) : impl_(std::make_unique<Impl>()) {
  impl_->server.Post(R"(.*)", [this, handler](const httplib::Request& req, httplib::Response& res) {
    ++requests_;
    const MockResponse out =
        handler(MockRequest{req.path, req.body, req.get_header_value("Authorization")});
    res.status = out.status;
    res.set_content(out.body, "application/json");
  });
  impl_->port = impl_->server.bind_to_any_port("127.0.0.1");
  if (impl_->port <= 0) throw std::runtime_error("mock server: bind failed");
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

MockServer::~MockServer() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

int MockServer::port() const noexcept { return impl_->port; }

std::string MockServer::url() const { return "http://127.0.0.1:" + std::to_string(impl_->port); }

std::string completion_body(const std::string& text) {
  return nlohmann::json{{"choices", nlohmann::json::array({{{"text", text}}})}}.dump();
}

}  // namespace specjudge::testing

#include <spdlog/spdlog.h>

#include <chrono>
#include <thread>

#include "httplib.h"
#include "solarcast/errors.hpp"
#include "solarcast/ingest.hpp"

namespace solarcast {

struct IngestServer::Impl {
  Impl(GeoLocation st, std::filesystem::path r) : station(st), root(std::move(r)) {}
  GeoLocation station;
  std::filesystem::path root;
  httplib::Server server;
  std::thread worker;
};

IngestServer::IngestServer(GeoLocation station, std::filesystem::path root)
    : impl_(std::make_unique<Impl>(station, std::move(root))) {
  auto& srv = impl_->server;
  srv.Get("/healthz", [](const httplib::Request&, httplib::Response& res) {
    res.set_content("ok", "text/plain");
  });
  srv.Post("/report", [this](const httplib::Request& req, httplib::Response& res) {
    const auto now = std::chrono::floor<std::chrono::seconds>(std::chrono::system_clock::now());
    const IngestResponse out = handle_report(req.body, req.get_header_value("Content-Type"),
                                             impl_->station, impl_->root, now);
    res.status = out.status;
    res.set_content(out.body, "text/plain");
    if (out.status == 200) {
      spdlog::debug("stored {}", out.body);
    } else {
      spdlog::warn("report rejected ({}): {}", out.status, out.body);
    }
  });
}

IngestServer::~IngestServer() { stop(); }

int IngestServer::bind(const std::string& host, int port) {
  if (port == 0) {
    const int bound = impl_->server.bind_to_any_port(host);
    if (bound < 0) throw IoError("cannot bind " + host);
    return bound;
  }
  if (!impl_->server.bind_to_port(host, port)) {
    throw IoError("cannot bind " + host + ":" + std::to_string(port));
  }
  return port;
}

void IngestServer::listen() {
  if (!impl_->server.listen_after_bind()) throw IoError("ingest server stopped with an error");
}

void IngestServer::start() {
  impl_->worker = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void IngestServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->worker.joinable()) impl_->worker.join();
}

}  // namespace solarcast

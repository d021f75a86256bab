// Eigen (via wmadv headers) must precede httplib: <resolv.h> defines _res.
#include "wmadv/error.hpp"
#include "wmadv/protocol.hpp"

#include "httplib.h"

#include <mutex>
#include <thread>

#include <fmt/format.h>

namespace wmadv {
namespace {

class HttpTransport final : public Transport {
 public:
  HttpTransport(const std::string& url, int timeout_ms) : url_(url), client_(url) {
    if (!client_.is_valid()) throw ValidationError(fmt::format("invalid oracle URL '{}'", url));
    const auto sec = timeout_ms / 1000;
    const auto usec = (timeout_ms % 1000) * 1000;
    client_.set_connection_timeout(sec, usec);
    client_.set_read_timeout(sec, usec);
    client_.set_write_timeout(sec, usec);
    client_.set_keep_alive(true);
  }

  std::string round_trip(const std::string& request) override {
    std::lock_guard lock(mutex_);
    auto res = client_.Post(std::string(kHttpOraclePath), request, "application/json");
    if (!res) {
      throw OracleError(fmt::format("HTTP oracle {}: {}", url_, httplib::to_string(res.error())));
    }
    if (res->status >= 500) {
      throw OracleError(fmt::format("HTTP oracle {} answered {}", url_, res->status));
    }
    if (res->status != 200 && res->body.find("\"error\"") == std::string::npos) {
      throw ProtocolError(fmt::format("HTTP oracle {} answered {}: {}", url_, res->status,
                                      res->body.substr(0, 160)));
    }
    return res->body;
  }

 private:
  std::string url_;
  httplib::Client client_;
  std::mutex mutex_;
};

}  // namespace

std::unique_ptr<Transport> make_http_transport(const std::string& url, int timeout_ms) {
  return std::make_unique<HttpTransport>(url, timeout_ms);
}

struct HttpOracleServer::Impl {
  explicit Impl(Oracle& o) : oracle(o) {
    server.Post(std::string(kHttpOraclePath), [this](const httplib::Request& req, httplib::Response& res) {
      res.set_content(handle_request(oracle, req.body), "application/json");
    });
  }
  Oracle& oracle;
  httplib::Server server;
  std::thread worker;
};

HttpOracleServer::HttpOracleServer(Oracle& oracle) : impl_(std::make_unique<Impl>(oracle)) {}

HttpOracleServer::~HttpOracleServer() { stop(); }

int HttpOracleServer::start(const std::string& host, int port) {
  int bound = port;
  if (port == 0) {
    bound = impl_->server.bind_to_any_port(host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    bound = -1;
  }
  if (bound < 0) throw OracleError(fmt::format("cannot bind HTTP oracle to {}:{}", host, port));
  impl_->worker = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void HttpOracleServer::run(const std::string& host, int port) {
  if (!impl_->server.listen(host, port)) {
    throw OracleError(fmt::format("cannot serve HTTP oracle on {}:{}", host, port));
  }
}

void HttpOracleServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->worker.joinable()) impl_->worker.join();
}

}  // namespace wmadv

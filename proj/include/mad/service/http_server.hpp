#pragma once

#include "mad/error.hpp"
#include "mad/service/service.hpp"

#include <memory>
#include <string>
#include <thread>

namespace httplib {
class Server;
}

namespace mad::service {

/// HTTP status for an error kind (400/404/409/413/500, 502 for RPC trouble).
int http_status(ErrorKind kind);

/// JSON API over a Service. Routes:
///   POST /api/decompile
///   GET  /api/jobs/{id}
///   GET  /api/packages/{pid}/modules
///   GET  /api/packages/{pid}/modules/{m}/views/{view}
///   GET  /api/packages/{pid}/modules/{m}/verification
///   POST /api/packages/{pid}/modules/{m}/functions/{f}/redecompile
///   GET  /api/health
class HttpServer {
public:
    explicit HttpServer(Service& service);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    /// Binds (port 0 picks a free one) and serves on a background thread.
    /// Returns the bound port; throws Io when binding fails.
    int start(const std::string& host = "127.0.0.1", int port = 0);
    /// Serves on the calling thread until stop().
    void listen(const std::string& host, int port);
    void stop();
    int port() const { return port_; }

private:
    void routes();

    Service& service_;
    std::unique_ptr<httplib::Server> server_;
    std::thread thread_;
    int port_ = 0;
};

} // namespace mad::service

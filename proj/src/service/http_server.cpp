#include "mad/service/http_server.hpp"

#include "mad/error.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

namespace mad::service {

using json = nlohmann::ordered_json;

int http_status(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::InvalidPackageId:
    case ErrorKind::InvalidRequest:
    case ErrorKind::EmptyInput:
    case ErrorKind::SyntaxError:
    case ErrorKind::SchemaError:
        return 400;
    case ErrorKind::UploadTooLarge:
        return 413;
    case ErrorKind::PackageNotFound:
    case ErrorKind::UnknownFunction:
    case ErrorKind::UnknownView:
    case ErrorKind::UnknownJob:
        return 404;
    case ErrorKind::ViewNotReady:
        return 409;
    case ErrorKind::RpcError:
        return 502;
    default:
        return 500;
    }
}

namespace {

void send_json(httplib::Response& res, int status, const json& body)
{
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, const Error& e)
{
    send_json(res, http_status(e.kind()),
              {{"error", to_string(e.kind())}, {"subject", e.subject()}, {"message", e.what()}});
}

template <class F>
httplib::Server::Handler guarded(F f)
{
    return [f](const httplib::Request& req, httplib::Response& res) {
        try {
            f(req, res);
        } catch (const Error& e) {
            send_error(res, e);
        } catch (const std::exception& e) {
            send_json(res, 500, {{"error", "Internal"}, {"message", e.what()}});
        }
    };
}

json parse_body(const httplib::Request& req)
{
    if (req.body.empty())
        return json::object();
    try {
        return json::parse(req.body);
    } catch (const json::exception& e) {
        throw Error(ErrorKind::InvalidRequest, "body", e.what());
    }
}

} // namespace

HttpServer::HttpServer(Service& service) : service_(service), server_(std::make_unique<httplib::Server>())
{
    routes();
}

HttpServer::~HttpServer() { stop(); }

void HttpServer::routes()
{
    auto& s = *server_;
    s.set_default_headers({{"Access-Control-Allow-Origin", "*"},
                           {"Access-Control-Allow-Headers", "Content-Type"},
                           {"Access-Control-Allow-Methods", "GET, POST, OPTIONS"}});
    s.set_payload_max_length(64u << 20); // the service applies its own upload limit
    s.Options(R"(/api/.*)", [](const httplib::Request&, httplib::Response& res) { res.status = 204; });

    s.Get("/api/health", [this](const httplib::Request&, httplib::Response& res) {
        send_json(res, 200, {{"status", "ok"}, {"model_id", service_.backend().model_id()}});
    });

    s.Post("/api/decompile", guarded([this](const httplib::Request& req, httplib::Response& res) {
               const auto id = service_.submit(SubmitRequest::from_json(parse_body(req)));
               const auto st = service_.job(id);
               send_json(res, st.state == JobState::Complete ? 200 : 202, st.to_json());
           }));

    s.Get(R"(/api/jobs/([^/]+))", guarded([this](const httplib::Request& req, httplib::Response& res) {
              send_json(res, 200, service_.job(req.matches[1]).to_json());
          }));

    s.Get(R"(/api/packages/([^/]+)/modules)", guarded([this](const httplib::Request& req, httplib::Response& res) {
              const std::string pid = req.matches[1];
              send_json(res, 200, {{"package_id", pid}, {"modules", service_.modules(pid)}, {"views", view_names()}});
          }));

    s.Get(R"(/api/packages/([^/]+)/modules/([^/]+)/views/([^/]+))",
          guarded([this](const httplib::Request& req, httplib::Response& res) {
              const std::string pid = req.matches[1], module = req.matches[2], view = req.matches[3];
              send_json(res, 200,
                        {{"package_id", pid}, {"module", module}, {"view", view},
                         {"content", service_.view(pid, module, view)}});
          }));

    s.Get(R"(/api/packages/([^/]+)/modules/([^/]+)/verification)",
          guarded([this](const httplib::Request& req, httplib::Response& res) {
              send_json(res, 200, service_.verification(req.matches[1], req.matches[2]));
          }));

    s.Post(R"(/api/packages/([^/]+)/modules/([^/]+)/functions/([^/]+)/redecompile)",
           guarded([this](const httplib::Request& req, httplib::Response& res) {
               const auto id = service_.redecompile(req.matches[1], req.matches[2], req.matches[3]);
               send_json(res, 202, service_.job(id).to_json());
           }));

    s.set_logger([](const httplib::Request& req, const httplib::Response& res) {
        spdlog::debug("{} {} -> {}", req.method, req.path, res.status);
    });
}

int HttpServer::start(const std::string& host, int port)
{
    port_ = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
    if (port_ <= 0)
        throw Error(ErrorKind::Io, host + ":" + std::to_string(port), "cannot bind");
    thread_ = std::thread([this] { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return port_;
}

void HttpServer::listen(const std::string& host, int port)
{
    port_ = port;
    if (!server_->listen(host, port))
        throw Error(ErrorKind::Io, host + ":" + std::to_string(port), "cannot listen");
}

void HttpServer::stop()
{
    if (server_)
        server_->stop();
    if (thread_.joinable())
        thread_.join();
}

} // namespace mad::service

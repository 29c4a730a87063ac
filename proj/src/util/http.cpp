#include "mad/util/http.hpp"

#include "mad/error.hpp"

#include <httplib.h>

namespace mad::util {

Url parse_url(const std::string& url)
{
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos)
        throw Error(ErrorKind::InvalidRequest, url, "URL must start with http:// or https://");
    const std::string scheme = url.substr(0, scheme_end);
    if (scheme != "http" && scheme != "https")
        throw Error(ErrorKind::InvalidRequest, url, "unsupported scheme " + scheme);
    const auto path_start = url.find('/', scheme_end + 3);
    Url out;
    out.scheme_host_port = url.substr(0, path_start);
    out.path = path_start == std::string::npos ? "/" : url.substr(path_start);
    if (out.scheme_host_port.size() == scheme_end + 3)
        throw Error(ErrorKind::InvalidRequest, url, "missing host");
    return out;
}

HttpResult http_post_json(const std::string& url, const std::string& body, const Headers& headers,
                          std::chrono::milliseconds timeout)
{
    const Url u = parse_url(url);
    httplib::Client cli(u.scheme_host_port);
    cli.set_connection_timeout(timeout);
    cli.set_read_timeout(timeout);
    cli.set_write_timeout(timeout);
    httplib::Headers h;
    for (const auto& [k, v] : headers)
        h.emplace(k, v);

    HttpResult out;
    auto res = cli.Post(u.path, h, body, "application/json");
    if (!res) {
        out.error = httplib::to_string(res.error());
        out.timed_out = res.error() == httplib::Error::Read || res.error() == httplib::Error::Write ||
                        res.error() == httplib::Error::ConnectionTimeout;
        return out;
    }
    out.status = res->status;
    out.body = res->body;
    return out;
}

} // namespace mad::util

#pragma once

#include <chrono>
#include <string>
#include <utility>
#include <vector>

namespace mad::util {

struct Url {
    std::string scheme_host_port; ///< "https://host:443"
    std::string path;             ///< "/v1/chat/completions" (at least "/")
};

/// Splits an absolute http(s) URL. Throws InvalidRequest.
Url parse_url(const std::string& url);

struct HttpResult {
    int status = 0;          ///< 0 when no response arrived
    std::string body;
    std::string error;       ///< transport error description
    bool timed_out = false;
    bool transport_error() const { return status == 0; }
};

using Headers = std::vector<std::pair<std::string, std::string>>;

/// Single POST with a JSON body; never throws for network failures.
HttpResult http_post_json(const std::string& url, const std::string& body, const Headers& headers,
                          std::chrono::milliseconds timeout);

} // namespace mad::util

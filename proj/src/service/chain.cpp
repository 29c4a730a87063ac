#include "mad/service/chain.hpp"

#include "mad/error.hpp"
#include "mad/util/http.hpp"

#include <spdlog/spdlog.h>

#include <atomic>
#include <cctype>
#include <cstdlib>
#include <thread>

namespace mad::service {

using json = nlohmann::ordered_json;

std::string normalize_package_id(std::string_view id)
{
    std::string_view hex = id;
    if (hex.starts_with("0x") || hex.starts_with("0X"))
        hex.remove_prefix(2);
    const bool ok = hex.size() == 64 && std::all_of(hex.begin(), hex.end(), [](char c) { return std::isxdigit(static_cast<unsigned char>(c)); });
    if (!ok)
        throw Error(ErrorKind::InvalidPackageId, std::string(id),
                    "expected 64 hex digits, got " + std::to_string(hex.size()) + " characters");
    std::string out = "0x";
    for (char c : hex)
        out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

ChainClient::ChainClient(std::string rpc_url, unsigned retries, std::chrono::milliseconds timeout,
                         std::chrono::milliseconds backoff)
    : url_(std::move(rpc_url)), retries_(retries), timeout_(timeout), backoff_(backoff)
{
}

ChainClient ChainClient::from_env()
{
    const char* url = std::getenv("MAD_RPC_URL");
    return ChainClient(url && *url ? url : "https://fullnode.mainnet.sui.io:443");
}

json ChainClient::call(const std::string& method, const json& params) const
{
    static std::atomic<long> next_id{1};
    const json req = {{"jsonrpc", "2.0"}, {"id", next_id++}, {"method", method}, {"params", params}};
    util::HttpResult res;
    for (unsigned attempt = 0; attempt <= retries_; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(backoff_ * (1u << (attempt - 1)));
        res = util::http_post_json(url_, req.dump(), {}, timeout_);
        if (!res.transport_error() && res.status < 500)
            break;
        spdlog::warn("rpc {} attempt {} failed: {}", method, attempt + 1,
                     res.transport_error() ? res.error : "HTTP " + std::to_string(res.status));
    }
    if (res.transport_error())
        throw Error(ErrorKind::RpcError, "0", method + ": " + res.error);
    if (res.status != 200)
        throw Error(ErrorKind::RpcError, std::to_string(res.status), method + ": " + res.body);
    json doc;
    try {
        doc = json::parse(res.body);
    } catch (const json::parse_error& e) {
        throw Error(ErrorKind::RpcError, "200", method + ": malformed response: " + e.what());
    }
    if (doc.contains("error")) {
        const auto& err = doc["error"];
        const std::string msg = err.value("message", std::string("unknown error"));
        // fullnodes answer unknown packages with an invalid-params error
        if (err.value("code", 0) == -32602 || msg.find("not exist") != std::string::npos)
            throw Error(ErrorKind::PackageNotFound, params.empty() ? method : params[0].dump(), msg);
        throw Error(ErrorKind::RpcError, std::to_string(err.value("code", 0)), method + ": " + msg);
    }
    if (!doc.contains("result"))
        throw Error(ErrorKind::RpcError, "200", method + ": response without result");
    return doc["result"];
}

FetchedPackage ChainClient::fetch_package(std::string_view package_id) const
{
    FetchedPackage out;
    out.package_id = normalize_package_id(package_id);

    const auto obj = call("sui_getObject", json::array({out.package_id, {{"showBcs", true}}}));
    if (obj.contains("error") || !obj.contains("data"))
        throw Error(ErrorKind::PackageNotFound, out.package_id,
                    obj.contains("error") ? obj["error"].dump() : std::string("object has no data"));
    const auto& bcs = obj["data"].value("bcs", json::object());
    if (bcs.value("dataType", std::string()) != "package" || !bcs.contains("moduleMap"))
        throw Error(ErrorKind::PackageNotFound, out.package_id, "object is not a package");
    for (const auto& [name, b64] : bcs["moduleMap"].items())
        out.bytecode[name] = b64.get<std::string>();

    const auto modules = call("sui_getNormalizedMoveModulesByPackage", json::array({out.package_id}));
    if (!modules.is_object() || modules.empty())
        throw Error(ErrorKind::PackageNotFound, out.package_id, "package has no modules");
    for (const auto& [name, doc] : modules.items())
        out.normalized[name] = doc;
    return out;
}

} // namespace mad::service

#pragma once

#include <json.hpp>

#include <chrono>
#include <map>
#include <string>

namespace mad::service {

/// "0x" + 64 hex digits, or 64 hex digits. Returns the lowercase 0x form;
/// throws InvalidPackageId.
std::string normalize_package_id(std::string_view id);

struct FetchedPackage {
    std::string package_id;
    /// module name -> normalized module document
    std::map<std::string, nlohmann::ordered_json> normalized;
    /// module name -> base64 bytecode
    std::map<std::string, std::string> bytecode;
};

/// JSON-RPC 2.0 client for a fullnode: `sui_getNormalizedMoveModulesByPackage`
/// and `sui_getObject` with `showBcs`.
class ChainClient {
public:
    explicit ChainClient(std::string rpc_url, unsigned retries = 2,
                         std::chrono::milliseconds timeout = std::chrono::seconds(30),
                         std::chrono::milliseconds backoff = std::chrono::milliseconds(200));

    /// From MAD_RPC_URL (default: the public mainnet fullnode).
    static ChainClient from_env();

    /// Throws InvalidPackageId, PackageNotFound, RpcError(status).
    FetchedPackage fetch_package(std::string_view package_id) const;

    /// One call; returns `result`. Throws RpcError / PackageNotFound.
    nlohmann::ordered_json call(const std::string& method, const nlohmann::ordered_json& params) const;

    const std::string& url() const { return url_; }

private:
    std::string url_;
    unsigned retries_;
    std::chrono::milliseconds timeout_;
    std::chrono::milliseconds backoff_;
};

} // namespace mad::service

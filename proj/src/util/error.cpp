#include "mad/error.hpp"

#include <fmt/format.h>

namespace mad {

std::string_view to_string(ErrorKind kind)
{
    switch (kind) {
    case ErrorKind::EmptyInput: return "EmptyInput";
    case ErrorKind::SyntaxError: return "SyntaxError";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::UnbalancedBraces: return "UnbalancedBraces";
    case ErrorKind::NoModuleDeclaration: return "NoModuleDeclaration";
    case ErrorKind::UnknownFunction: return "UnknownFunction";
    case ErrorKind::MissingFunction: return "MissingFunction";
    case ErrorKind::DuplicateFunction: return "DuplicateFunction";
    case ErrorKind::MissingAsset: return "MissingAsset";
    case ErrorKind::MalformedExample: return "MalformedExample";
    case ErrorKind::AssetsNotLoaded: return "AssetsNotLoaded";
    case ErrorKind::FixtureMiss: return "FixtureMiss";
    case ErrorKind::RemoteError: return "RemoteError";
    case ErrorKind::Timeout: return "Timeout";
    case ErrorKind::ExtractionFailed: return "ExtractionFailed";
    case ErrorKind::UnparsableSource: return "UnparsableSource";
    case ErrorKind::SandboxError: return "SandboxError";
    case ErrorKind::ManifestError: return "ManifestError";
    case ErrorKind::UnknownFormat: return "UnknownFormat";
    case ErrorKind::ToolchainMissing: return "ToolchainMissing";
    case ErrorKind::InvalidPackageId: return "InvalidPackageId";
    case ErrorKind::UploadTooLarge: return "UploadTooLarge";
    case ErrorKind::RpcError: return "RpcError";
    case ErrorKind::PackageNotFound: return "PackageNotFound";
    case ErrorKind::ViewNotReady: return "ViewNotReady";
    case ErrorKind::UnknownView: return "UnknownView";
    case ErrorKind::InvalidRequest: return "InvalidRequest";
    case ErrorKind::UnknownJob: return "UnknownJob";
    case ErrorKind::Io: return "Io";
    }
    return "Unknown";
}

namespace {
std::string compose_message(ErrorKind kind, const std::string& subject, const std::string& detail,
                            std::size_t position)
{
    std::string msg = fmt::format("{}({})", to_string(kind), subject);
    if (position != 0)
        msg += fmt::format(" at {}", position);
    if (!detail.empty())
        msg += ": " + detail;
    return msg;
}
} // namespace

Error::Error(ErrorKind kind, std::string subject, std::string detail, std::size_t position)
    : std::runtime_error(compose_message(kind, subject, detail, position)),
      kind_(kind),
      subject_(std::move(subject)),
      detail_(std::move(detail)),
      position_(position)
{
}

} // namespace mad

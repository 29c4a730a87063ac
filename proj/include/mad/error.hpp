#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace mad {

enum class ErrorKind {
    // module-ir
    EmptyInput,
    SyntaxError,
    SchemaError,
    // segmentation
    UnbalancedBraces,
    NoModuleDeclaration,
    UnknownFunction,
    MissingFunction,
    DuplicateFunction,
    // prompt-engine
    MissingAsset,
    MalformedExample,
    AssetsNotLoaded,
    // llm-client
    FixtureMiss,
    RemoteError,
    Timeout,
    ExtractionFailed,
    // verifier
    UnparsableSource,
    SandboxError,
    // eval-harness
    ManifestError,
    UnknownFormat,
    ToolchainMissing,
    // service
    InvalidPackageId,
    UploadTooLarge,
    RpcError,
    PackageNotFound,
    ViewNotReady,
    UnknownView,
    InvalidRequest,
    UnknownJob,
    Io,
};

std::string_view to_string(ErrorKind kind);

/// Single exception type for the whole pipeline. `kind()` identifies the
/// failure family; `subject()` carries the offending name, path or digest;
/// `position()` is a line number or byte offset where one applies.
class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string subject, std::string detail = {}, std::size_t position = 0);

    ErrorKind kind() const noexcept { return kind_; }
    const std::string& subject() const noexcept { return subject_; }
    const std::string& detail() const noexcept { return detail_; }
    std::size_t position() const noexcept { return position_; }

private:
    ErrorKind kind_;
    std::string subject_;
    std::string detail_;
    std::size_t position_;
};

} // namespace mad

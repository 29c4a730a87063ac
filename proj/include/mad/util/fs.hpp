#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace mad::util {

namespace fs = std::filesystem;

/// Throws Io when the file cannot be read.
std::string read_file(const fs::path& path);

/// Writes via a sibling temp file and rename, so readers never see a torn file.
void write_file_atomic(const fs::path& path, std::string_view content);

/// Scratch directory removed (recursively) on destruction.
class TempDir {
public:
    explicit TempDir(std::string_view prefix = "mad");
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    TempDir(TempDir&& other) noexcept;
    TempDir& operator=(TempDir&&) = delete;

    const fs::path& path() const { return path_; }

private:
    fs::path path_;
};

/// Result of running a shell command with stdout and stderr merged.
struct CommandResult {
    int exit_code = -1;
    std::string output;
};

/// Runs `command` through /bin/sh inside `cwd`.
CommandResult run_command(const std::string& command, const fs::path& cwd);

/// True when the first word of `command` names an executable on PATH (or an
/// existing executable path).
bool command_available(std::string_view command);

/// Single-quotes `arg` for /bin/sh.
std::string shell_quote(std::string_view arg);

} // namespace mad::util

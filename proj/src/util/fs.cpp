#include "mad/util/fs.hpp"

#include "mad/error.hpp"

#include <unistd.h>

#include <array>
#include <atomic>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <random>
#include <sstream>
#include <sys/wait.h>

namespace mad::util {

std::string read_file(const fs::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorKind::Io, path.string(), "cannot open for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

namespace {
std::string unique_suffix()
{
    static std::atomic<unsigned long> counter{0};
    thread_local std::mt19937_64 rng{std::random_device{}()};
    return std::to_string(::getpid()) + "-" + std::to_string(counter.fetch_add(1)) + "-" + std::to_string(rng() % 1000000);
}
} // namespace

void write_file_atomic(const fs::path& path, std::string_view content)
{
    if (path.has_parent_path())
        fs::create_directories(path.parent_path());
    const fs::path tmp = path.string() + ".tmp-" + unique_suffix();
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw Error(ErrorKind::Io, tmp.string(), "cannot open for writing");
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out)
            throw Error(ErrorKind::Io, tmp.string(), "write failed");
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp);
        throw Error(ErrorKind::Io, path.string(), ec.message());
    }
}

TempDir::TempDir(std::string_view prefix)
{
    std::error_code ec;
    for (int attempt = 0; attempt < 16; ++attempt) {
        fs::path candidate = fs::temp_directory_path() / (std::string(prefix) + "-" + unique_suffix());
        if (fs::create_directories(candidate, ec)) {
            path_ = std::move(candidate);
            return;
        }
    }
    throw Error(ErrorKind::SandboxError, std::string(prefix), "cannot create temp directory");
}

TempDir::TempDir(TempDir&& other) noexcept : path_(std::move(other.path_)) { other.path_.clear(); }

TempDir::~TempDir()
{
    if (path_.empty())
        return;
    std::error_code ec;
    fs::remove_all(path_, ec);
}

CommandResult run_command(const std::string& command, const fs::path& cwd)
{
    const std::string full = "cd " + shell_quote(cwd.string()) + " && { " + command + " ; } 2>&1";
    FILE* pipe = ::popen(full.c_str(), "r");
    if (!pipe)
        throw Error(ErrorKind::SandboxError, command, "popen failed");
    CommandResult result;
    std::array<char, 4096> buf{};
    std::size_t n = 0;
    while ((n = std::fread(buf.data(), 1, buf.size(), pipe)) > 0)
        result.output.append(buf.data(), n);
    const int status = ::pclose(pipe);
    result.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : 128;
    return result;
}

bool command_available(std::string_view command)
{
    std::string exe;
    if (command.starts_with('\'')) {
        const auto close = command.find('\'', 1);
        if (close == std::string_view::npos)
            return false;
        exe = command.substr(1, close - 1);
    } else {
        exe = command.substr(0, command.find_first_of(" \t"));
    }
    if (exe.empty())
        return false;
    if (exe.find('/') != std::string::npos)
        return ::access(exe.c_str(), X_OK) == 0;
    const char* path_env = std::getenv("PATH");
    if (!path_env)
        return false;
    std::string_view path(path_env);
    while (!path.empty()) {
        const auto colon = path.find(':');
        const std::string dir(path.substr(0, colon));
        if (!dir.empty() && ::access((fs::path(dir) / exe).c_str(), X_OK) == 0)
            return true;
        if (colon == std::string_view::npos)
            break;
        path.remove_prefix(colon + 1);
    }
    return false;
}

std::string shell_quote(std::string_view arg)
{
    std::string out = "'";
    for (char c : arg) {
        if (c == '\'')
            out += "'\\''";
        else
            out.push_back(c);
    }
    out.push_back('\'');
    return out;
}

} // namespace mad::util

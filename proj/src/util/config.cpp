#include "mad/config.hpp"

#include <cstdlib>

#ifndef MAD_SOURCE_ROOT
#define MAD_SOURCE_ROOT "."
#endif

namespace mad {

namespace {
std::filesystem::path from_env(const char* var, const char* fallback)
{
    if (const char* v = std::getenv(var); v && *v)
        return v;
    return std::filesystem::path(MAD_SOURCE_ROOT) / fallback;
}
} // namespace

std::filesystem::path config_dir() { return from_env("MAD_CONFIG_DIR", "config"); }
std::filesystem::path prompts_dir() { return from_env("MAD_PROMPTS_DIR", "prompts"); }

} // namespace mad

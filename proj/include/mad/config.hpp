#pragma once

#include <filesystem>

namespace mad {

/// Directory holding builtins.json and error_patterns.json (MAD_CONFIG_DIR
/// overrides the build-time default).
std::filesystem::path config_dir();

/// Prompt assets directory (MAD_PROMPTS_DIR overrides the build-time default).
std::filesystem::path prompts_dir();

} // namespace mad

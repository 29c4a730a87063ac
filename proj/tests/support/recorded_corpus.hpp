#pragma once

#include "mad/prompt/prompt.hpp"

#include <array>
#include <filesystem>
#include <string>

namespace mad::test {

/// Synthetic 30-module corpus with recorded model responses and recorded
/// build outcomes for every ablation arm.
struct RecordedCorpus {
    std::filesystem::path root;
    std::filesystem::path manifest;  ///< manifest.json
    std::filesystem::path responses; ///< RecordedBackend store
    std::filesystem::path outcomes;  ///< RecordedToolchain file
    std::string model_id;
};

/// Low-level source of synthetic module `i`.
std::string synthetic_module(std::size_t i);

/// Writes the corpus under `root`. For arm j (ablation_arms() order) the first
/// passes[j] entries carry a clean answer recorded as a passing build; the
/// others carry an answer that reuses a moved value, recorded as a failing
/// build with the compiler's diagnostic.
RecordedCorpus build_recorded_corpus(const std::filesystem::path& root, const prompt::PromptEngine& engine,
                                     std::array<std::size_t, 4> passes = {22, 14, 21, 21}, std::size_t entries = 30);

} // namespace mad::test

#pragma once

#include "mad/seg/segmentation.hpp"

#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace mad::prompt {

struct FewshotExample {
    std::size_t index = 0;   ///< NN from the file name
    std::string name;        ///< function defined by both sides
    std::string input;       ///< low-level text (tag line stripped)
    std::string output;      ///< reference source
    std::vector<std::string> tags;
};

/// Loaded prompt assets. `version` is a digest over every asset byte.
struct PromptAssets {
    std::string domain_knowledge;
    std::string instructions;
    std::vector<FewshotExample> examples;
    std::string version;
};

inline constexpr std::size_t kDefaultFewshotCount = 17;

/// Reads `dir/domain_knowledge.md`, `dir/instructions.md` and
/// `dir/fewshot/NN_input.move` + `NN_output.move`.
/// Throws MissingAsset(name) or MalformedExample(index).
PromptAssets load_prompt_assets(const std::filesystem::path& dir);

struct PromptConfig {
    bool include_domain_knowledge = true;
    bool include_instructions = true;
    bool include_fewshot = true;
    std::size_t fewshot_count = kDefaultFewshotCount;
    std::string prompt_version;

    /// "full", "no-domain", "no-instructions", "no-fewshot" or "custom".
    std::string arm() const;
    friend bool operator==(const PromptConfig&, const PromptConfig&) = default;
};

/// The four ablation arms: full, then one section removed each.
std::vector<PromptConfig> ablation_arms();
/// Throws InvalidRequest for an unknown arm name.
PromptConfig arm_config(std::string_view arm);

struct PromptBundle {
    /// Subset of {("domain_knowledge", ..), ("instructions", ..)} in that order.
    std::vector<std::pair<std::string, std::string>> system_sections;
    /// (user turn, assistant turn) exactly as sent.
    std::vector<std::pair<std::string, std::string>> fewshot_pairs;
    std::string user_payload;
    std::string prompt_version;
    /// Sum of the code-point lengths of every part above (version excluded).
    std::size_t char_count = 0;

    /// Chat-messages JSON array: one system message (sections joined by a
    /// blank line, omitted when empty), alternating few-shot turns, then the
    /// payload.
    std::string serialize() const;
    /// SHA-256 of serialize().
    std::string digest() const;
};

/// Code points in UTF-8 text.
std::size_t char_length(std::string_view text);

/// Wraps a function in the request template shared by few-shot turns and the
/// real payload. `context` may be empty.
std::string format_request(std::string_view context, std::string_view function_text);
/// Fenced assistant answer for a few-shot example.
std::string format_answer(std::string_view function_text);

class PromptEngine {
public:
    PromptEngine() = default;
    explicit PromptEngine(PromptAssets assets);

    bool loaded() const { return loaded_; }
    const PromptAssets& assets() const { return assets_; }
    const std::string& version() const { return assets_.version; }

    /// Throws AssetsNotLoaded on a default-constructed engine.
    PromptBundle compose(const seg::FunctionChunk& chunk, const PromptConfig& cfg) const;

    /// ablation arm with prompt_version filled in.
    PromptConfig config(std::string_view arm) const;

private:
    PromptAssets assets_;
    bool loaded_ = false;
};

} // namespace mad::prompt

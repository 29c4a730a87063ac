#pragma once

#include "mad/ir/types.hpp"
#include "mad/llm/client.hpp"
#include "mad/prompt/prompt.hpp"
#include "mad/seg/segmentation.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace mad::pipeline {

struct ChunkResult {
    std::string name;
    /// Extracted function text, or the low-level chunk when the call failed.
    std::string code;
    std::optional<llm::CompletionRecord> record;
    bool reprompted = false;
    /// Empty on success. Otherwise the error message; `fixture_miss` tells a
    /// missing recording apart from a real failure.
    std::string error;
    bool fixture_miss = false;

    bool ok() const { return error.empty(); }
};

struct ModuleResult {
    seg::SplitResult split;
    std::vector<ChunkResult> chunks; ///< chunk order
    std::string decompiled;

    bool complete() const;
    bool any_fixture_miss() const;
    std::vector<std::string> failed_functions() const;
};

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

struct Options {
    prompt::PromptConfig prompt;
    /// Worker threads for the chunk loop.
    std::size_t max_parallel = 4;
    /// Appends a regeneration line to the payload when nonzero.
    std::size_t attempt = 0;
    /// Called after each finished chunk (serialised, done is strictly increasing).
    ProgressFn on_progress;
};

/// Payload suffix asking for a fresh answer; recomputes char_count.
prompt::PromptBundle with_regeneration(prompt::PromptBundle bundle, std::size_t attempt);

/// One chunk: compose, complete, extract, check that exactly one function came
/// back. Never throws for backend or extraction failures.
ChunkResult decompile_chunk(const seg::FunctionChunk& chunk, const prompt::PromptEngine& engine, llm::Backend& backend,
                            const Options& opts);

/// Segments `low_level` against `ir`, decompiles every chunk with an OpenMP
/// worker loop and reassembles the module. Throws the segmentation errors.
ModuleResult decompile_module(const ir::ModuleIR& ir, std::string_view low_level, const prompt::PromptEngine& engine,
                              llm::Backend& backend, const Options& opts);

/// Same result computed one chunk at a time; kept as the reference for tests
/// and benchmarks.
ModuleResult decompile_module_serial(const ir::ModuleIR& ir, std::string_view low_level,
                                     const prompt::PromptEngine& engine, llm::Backend& backend, const Options& opts);

/// Re-runs one function of a finished result and reassembles. Throws
/// UnknownFunction.
ModuleResult redecompile_function(const ModuleResult& base, const ir::ModuleIR& ir, std::string_view function,
                                  const prompt::PromptEngine& engine, llm::Backend& backend, const Options& opts);

/// Reassembles from chunk results; a function whose output collides with an
/// earlier one falls back to its low-level text.
std::string assemble(const seg::SplitResult& split, std::vector<ChunkResult>& chunks);

} // namespace mad::pipeline

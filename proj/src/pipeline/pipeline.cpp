#include "mad/pipeline/pipeline.hpp"

#include "mad/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <atomic>
#include <mutex>
#include <set>

namespace mad::pipeline {

bool ModuleResult::complete() const
{
    return std::all_of(chunks.begin(), chunks.end(), [](const ChunkResult& c) { return c.ok(); });
}

bool ModuleResult::any_fixture_miss() const
{
    return std::any_of(chunks.begin(), chunks.end(), [](const ChunkResult& c) { return c.fixture_miss; });
}

std::vector<std::string> ModuleResult::failed_functions() const
{
    std::vector<std::string> out;
    for (const auto& c : chunks)
        if (!c.ok())
            out.push_back(c.name);
    return out;
}

prompt::PromptBundle with_regeneration(prompt::PromptBundle bundle, std::size_t attempt)
{
    if (attempt == 0)
        return bundle;
    const std::string line = "\n\nRegeneration attempt " + std::to_string(attempt) +
                             ": the previous answer was rejected by the reviewer, produce a fresh decompilation.";
    bundle.user_payload += line;
    bundle.char_count += prompt::char_length(line);
    return bundle;
}

ChunkResult decompile_chunk(const seg::FunctionChunk& chunk, const prompt::PromptEngine& engine, llm::Backend& backend,
                            const Options& opts)
{
    ChunkResult r;
    r.name = chunk.name;
    r.code = chunk.raw_text;
    try {
        const auto bundle = with_regeneration(engine.compose(chunk, opts.prompt), opts.attempt);
        auto d = llm::complete_and_extract(backend, bundle);
        seg::parse_function_output(d.code, chunk.name); // exactly one function, or throws
        r.code = std::move(d.code);
        r.record = std::move(d.record);
        r.reprompted = d.reprompted;
    } catch (const Error& e) {
        r.error = e.what();
        r.fixture_miss = e.kind() == ErrorKind::FixtureMiss;
        spdlog::warn("function {}: {}", chunk.name, e.what());
    }
    return r;
}

std::string assemble(const seg::SplitResult& split, std::vector<ChunkResult>& chunks)
{
    std::vector<std::pair<std::string, std::string>> outputs;
    std::set<std::string> seen;
    for (auto& c : chunks) {
        std::string defined = c.name;
        try {
            defined = seg::parse_function_output(c.code, c.name).name;
        } catch (const Error&) {
        }
        if (!seen.insert(defined).second) {
            // the model re-emitted a sibling; keep the original chunk instead
            const auto& raw = std::find_if(split.chunks.begin(), split.chunks.end(),
                                           [&](const seg::FunctionChunk& f) { return f.name == c.name; })
                                  ->raw_text;
            c.code = raw;
            if (c.error.empty())
                c.error = "DuplicateFunction(" + defined + "): output collides with an earlier function";
            seen.insert(c.name);
        }
        outputs.emplace_back(c.name, c.code);
    }
    return seg::reassemble(split.header, outputs);
}

namespace {

std::size_t workers(const Options& opts, std::size_t n)
{
    return std::max<std::size_t>(1, std::min(opts.max_parallel, n));
}

} // namespace

ModuleResult decompile_module(const ir::ModuleIR& ir, std::string_view low_level, const prompt::PromptEngine& engine,
                              llm::Backend& backend, const Options& opts)
{
    ModuleResult out;
    out.split = seg::segment(low_level, ir);
    const auto& chunks = out.split.chunks;
    const std::size_t n = chunks.size();
    out.chunks.resize(n);

    std::atomic<std::size_t> done{0};
    std::mutex progress_mu;
    const int threads = static_cast<int>(workers(opts, n));
    const auto total = static_cast<std::ptrdiff_t>(n);

#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
    for (std::ptrdiff_t i = 0; i < total; ++i) {
        out.chunks[static_cast<std::size_t>(i)] = decompile_chunk(chunks[static_cast<std::size_t>(i)], engine, backend, opts);
        if (opts.on_progress) {
            std::lock_guard lock(progress_mu);
            opts.on_progress(++done, n);
        }
    }
    (void)threads; // unused without OpenMP

    out.decompiled = assemble(out.split, out.chunks);
    return out;
}

ModuleResult decompile_module_serial(const ir::ModuleIR& ir, std::string_view low_level,
                                     const prompt::PromptEngine& engine, llm::Backend& backend, const Options& opts)
{
    ModuleResult out;
    out.split = seg::segment(low_level, ir);
    std::size_t done = 0;
    for (const auto& chunk : out.split.chunks) {
        out.chunks.push_back(decompile_chunk(chunk, engine, backend, opts));
        if (opts.on_progress)
            opts.on_progress(++done, out.split.chunks.size());
    }
    out.decompiled = assemble(out.split, out.chunks);
    return out;
}

ModuleResult redecompile_function(const ModuleResult& base, const ir::ModuleIR& ir, std::string_view function,
                                  const prompt::PromptEngine& engine, llm::Backend& backend, const Options& opts)
{
    const auto it = std::find_if(base.split.chunks.begin(), base.split.chunks.end(),
                                 [&](const seg::FunctionChunk& c) { return c.name == function; });
    if (it == base.split.chunks.end() || !ir.find_function(function))
        throw Error(ErrorKind::UnknownFunction, std::string(function), "no such function in module " + ir.name);
    ModuleResult out = base;
    const auto idx = static_cast<std::size_t>(it - base.split.chunks.begin());
    out.chunks[idx] = decompile_chunk(*it, engine, backend, opts);
    if (opts.on_progress)
        opts.on_progress(1, 1);
    out.decompiled = assemble(out.split, out.chunks);
    return out;
}

} // namespace mad::pipeline

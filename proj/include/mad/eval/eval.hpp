#pragma once

#include "mad/llm/client.hpp"
#include "mad/prompt/prompt.hpp"
#include "mad/verify/verifier.hpp"

#include <json.hpp>

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace mad::eval {

struct ManifestEntry {
    std::string id;
    std::string category;
    /// At least one of disassembly / normalized is set. Paths are absolute
    /// after loading.
    std::filesystem::path disassembly;
    std::filesystem::path normalized;
    std::filesystem::path low_level;
    /// Original package (Move.toml, sources/, tests) for the unit-test run.
    std::filesystem::path package;
    /// Declared but not resolved: the toolchain relies on its implicit
    /// framework dependencies.
    std::vector<std::string> dependencies;
};

struct CorpusManifest {
    std::vector<ManifestEntry> entries;

    /// {"entries": [{"id", "category", "disassembly" | "normalized",
    /// "low_level", "package"?, "dependencies"?}]}; paths relative to the
    /// manifest's directory. Throws ManifestError.
    static CorpusManifest load(const std::filesystem::path& file);
    static CorpusManifest parse(const nlohmann::ordered_json& doc, const std::filesystem::path& base);
};

struct UnitTestOutcome {
    bool skipped = false;
    int passed = 0;
    int failed = 0;
    std::string log;
};

struct EntryOutcome {
    std::string id;
    std::string category;
    /// Set when the entry could not be decompiled (fixture miss, bad input).
    std::optional<std::string> skip_reason;
    std::vector<std::string> failed_functions;
    std::optional<verify::VerificationReport> verification;
    std::optional<UnitTestOutcome> unit_tests;
    std::string decompiled;

    verify::CompileStatus recompile_status() const;
};

struct EvalReport {
    std::vector<EntryOutcome> per_entry; ///< manifest order
    std::optional<double> success_rate;  ///< empty when nothing was attempted
    std::string model_id;
    prompt::PromptConfig prompt;
    std::string note; ///< free text shown in the report table (e.g. knowledge cutoff)
    std::string timestamp;

    std::size_t attempted() const;
    std::size_t passed() const;
    /// Rate recomputed from per_entry.
    std::optional<double> recompute_rate() const;
    nlohmann::ordered_json to_json(bool with_timestamp = true) const;
};

struct RunOptions {
    /// Entries decompiled concurrently.
    std::size_t max_parallel = 4;
    /// Run each entry's original tests against the decompiled module when the
    /// entry has a package and `test_toolchain` is available.
    bool unit_tests = false;
    verify::ToolchainConfig test_toolchain;
    std::string note;
};

/// Decompiles and verifies every entry. Per-entry failures are recorded, not
/// thrown.
EvalReport run_corpus(const CorpusManifest& manifest, llm::Backend& backend, const prompt::PromptEngine& engine,
                      const prompt::PromptConfig& prompt_cfg, verify::Toolchain* toolchain, const RunOptions& opts = {});

struct AblationRow {
    std::string arm;
    EvalReport report;
};

/// One run_corpus per ablation arm, same corpus and backend.
std::vector<AblationRow> run_ablation(const CorpusManifest& manifest, llm::Backend& backend,
                                      const prompt::PromptEngine& engine, verify::Toolchain* toolchain,
                                      const RunOptions& opts = {});

/// Substitutes `decompiled` for the module's source in a copy of
/// entry.package and runs the toolchain's test command.
UnitTestOutcome run_unit_tests(const ManifestEntry& entry, std::string_view module_name, std::string_view decompiled,
                               const verify::ToolchainConfig& toolchain);

/// Parses "Test result: OK|FAILED. Total tests: N; passed: P; failed: F".
std::optional<std::pair<int, int>> parse_test_counts(std::string_view log);

/// "73.3" style, or "n/a".
std::string format_rate(std::optional<double> rate);

/// "md" | "markdown" | "csv" | "json". Rows sorted by rate, descending.
/// Throws UnknownFormat.
std::string render_report(const std::vector<EvalReport>& reports, std::string_view format);
std::string render_report(const EvalReport& report, std::string_view format);
/// Same table, rows kept in arm order.
std::string render_ablation(const std::vector<AblationRow>& rows, std::string_view format);

} // namespace mad::eval

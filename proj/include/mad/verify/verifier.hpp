#pragma once

#include "mad/ir/types.hpp"

#include <json.hpp>

#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace mad::verify {

enum class ErrorClass { ParseError, TypeError, MoveRuleViolation, UnresolvedName, Other };
std::string_view to_string(ErrorClass c);

enum class CompileStatus { Pass, Fail, Skipped };
std::string_view to_string(CompileStatus s);

struct CompileOutcome {
    CompileStatus status = CompileStatus::Skipped;
    std::optional<ErrorClass> error_class; ///< set iff status == Fail
    std::string raw_log;

    static CompileOutcome skipped(std::string why) { return {CompileStatus::Skipped, std::nullopt, std::move(why)}; }
    bool is_skipped() const { return status == CompileStatus::Skipped; }
    friend bool operator==(const CompileOutcome&, const CompileOutcome&) = default;
};

struct FunctionReport {
    bool parse_ok = false;
    bool signature_match = false;
    std::vector<std::string> unknown_callees;
    /// Sibling functions the low-level body calls but the decompiled body does not.
    std::vector<std::string> dropped_calls;

    bool red() const { return !parse_ok || !signature_match || !unknown_callees.empty() || !dropped_calls.empty(); }
    friend bool operator==(const FunctionReport&, const FunctionReport&) = default;
};

struct ModuleReport {
    bool all_functions_present = false;
    std::vector<std::string> missing_functions;
    std::vector<std::string> extra_functions;
    CompileOutcome recompile;
    friend bool operator==(const ModuleReport&, const ModuleReport&) = default;
};

struct VerificationReport {
    std::map<std::string, FunctionReport> per_function;
    ModuleReport module_level;

    /// Red per-function entries plus extra functions.
    std::size_t findings() const;
    nlohmann::ordered_json to_json() const;
    friend bool operator==(const VerificationReport&, const VerificationReport&) = default;
};

/// Modules callable without a declared dependency.
class Builtins {
public:
    Builtins() = default;
    explicit Builtins(std::set<ir::ModuleRef> modules) : modules_(std::move(modules)) {}
    /// Throws ManifestError.
    static Builtins load(const std::filesystem::path& file);
    /// config_dir()/builtins.json, loaded once.
    static const Builtins& shipped();
    bool allows(const ir::ModuleRef& m) const { return modules_.contains(m); }
    std::size_t size() const { return modules_.size(); }

private:
    std::set<ir::ModuleRef> modules_;
};

struct SignatureReport {
    std::map<std::string, FunctionReport> per_function; ///< one entry per IR function
    std::vector<std::string> missing_functions;
    std::vector<std::string> extra_functions;
};

/// Throws UnparsableSource(position) when the module structure cannot be
/// recovered; a single unparsable function only clears its parse_ok.
SignatureReport check_signatures(const ir::ModuleIR& ir, std::string_view source);

struct CallSite {
    std::string callee; ///< as written: "f", "coin::value", "0x2::coin::value", ".method"
    std::size_t line = 0;
};

/// Call sites in one function's body (keywords, macros and struct packs
/// excluded).
std::vector<CallSite> find_calls(std::string_view function_text);

struct CallgraphReport {
    std::map<std::string, std::vector<std::string>> unknown_callees;
    std::map<std::string, std::vector<std::string>> dropped_calls;
    /// caller -> sibling callees, for both inputs.
    std::map<std::string, std::set<std::string>> internal_edges;
    std::map<std::string, std::set<std::string>> low_level_edges;
};

/// Resolves every call target of `source` against siblings, ir.dependencies
/// and `builtins`. With `low_level`, also reports internal edges that
/// disappeared. Throws UnparsableSource.
CallgraphReport check_callgraph(const ir::ModuleIR& ir, std::string_view source, std::string_view low_level = {},
                                const Builtins& builtins = Builtins::shipped());

// --- recompilation --------------------------------------------------------

/// Substring rules mapping a build log to an ErrorClass.
class ErrorPatterns {
public:
    struct Rule {
        std::string pattern;
        ErrorClass cls;
    };
    ErrorPatterns() = default;
    explicit ErrorPatterns(std::vector<Rule> rules, int version = 0) : rules_(std::move(rules)), version_(version) {}
    static ErrorPatterns load(const std::filesystem::path& file);
    static const ErrorPatterns& shipped();
    /// Earliest matching rule in the log; Other when none matches.
    ErrorClass classify(std::string_view log) const;
    int version() const { return version_; }

private:
    std::vector<Rule> rules_;
    int version_ = 0;
};

/// Module name -> source text.
using PackageSources = std::map<std::string, std::string>;

class Toolchain {
public:
    virtual ~Toolchain() = default;
    virtual CompileOutcome build(const PackageSources& sources) = 0;
    virtual std::string describe() const = 0;
};

struct ToolchainConfig {
    std::string command = "sui move build";
    /// Defaults to `command` with its final "build" replaced by "test".
    std::string test_command;
    std::string package_name = "decompiled";
    /// Empty = legacy edition, which is what low-level decompiler output
    /// (unqualified `struct`, no `let mut`) compiles under.
    std::string edition;
    /// Extra lines for the [dependencies] table; empty relies on the CLI's
    /// implicit framework dependencies.
    std::string dependencies;
    std::filesystem::path temp_root = std::filesystem::temp_directory_path();

    /// command from MAD_TOOLCHAIN_CMD, test command from MAD_TOOLCHAIN_TEST_CMD.
    static ToolchainConfig from_env();
    bool available() const;
    std::string effective_test_command() const;
    std::string manifest() const;
};

/// Runs the external build in a fresh temp workspace per call.
class ShellToolchain : public Toolchain {
public:
    explicit ShellToolchain(ToolchainConfig cfg, const ErrorPatterns& patterns = ErrorPatterns::shipped());
    CompileOutcome build(const PackageSources& sources) override;
    std::string describe() const override { return cfg_.command; }
    const ToolchainConfig& config() const { return cfg_; }

private:
    ToolchainConfig cfg_;
    const ErrorPatterns& patterns_;
};

/// Replays outcomes keyed by package_digest(sources); unknown packages are
/// skipped. File format: {"outcomes": {digest: {"status", "error_class", "log"}}}.
class RecordedToolchain : public Toolchain {
public:
    RecordedToolchain() = default;
    static RecordedToolchain load(const std::filesystem::path& file);
    void put(const std::string& digest, CompileOutcome outcome) { outcomes_[digest] = std::move(outcome); }
    void save(const std::filesystem::path& file) const;
    CompileOutcome build(const PackageSources& sources) override;
    std::string describe() const override { return "recorded"; }

private:
    std::map<std::string, CompileOutcome> outcomes_;
};

std::string package_digest(const PackageSources& sources);

/// Builds a single module. Skipped when `toolchain` is null.
CompileOutcome recompile(std::string_view source, Toolchain* toolchain);
/// Builds a package of modules.
CompileOutcome recompile_package(const PackageSources& sources, Toolchain* toolchain);

/// Shell toolchain from the environment, or null when its command is absent.
std::unique_ptr<Toolchain> toolchain_from_env();

/// check_signatures + check_callgraph + recompile.
VerificationReport verify(const ir::ModuleIR& ir, std::string_view low_level, std::string_view decompiled,
                          Toolchain* toolchain, const Builtins& builtins = Builtins::shipped());

} // namespace mad::verify

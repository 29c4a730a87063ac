#include "mad/verify/verifier.hpp"

#include "mad/config.hpp"
#include "mad/error.hpp"
#include "mad/ir/parser.hpp"
#include "mad/ir/render.hpp"
#include "mad/seg/segmentation.hpp"
#include "mad/util/digest.hpp"
#include "mad/util/fs.hpp"
#include "mad/util/lexer.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdlib>

namespace mad::verify {

using json = nlohmann::ordered_json;
using util::Token;
using util::TokenKind;

std::string_view to_string(ErrorClass c)
{
    switch (c) {
    case ErrorClass::ParseError: return "ParseError";
    case ErrorClass::TypeError: return "TypeError";
    case ErrorClass::MoveRuleViolation: return "MoveRuleViolation";
    case ErrorClass::UnresolvedName: return "UnresolvedName";
    case ErrorClass::Other: return "Other";
    }
    return "Other";
}

namespace {
std::optional<ErrorClass> error_class_from(std::string_view s)
{
    for (auto c : {ErrorClass::ParseError, ErrorClass::TypeError, ErrorClass::MoveRuleViolation, ErrorClass::UnresolvedName,
                   ErrorClass::Other})
        if (to_string(c) == s)
            return c;
    return std::nullopt;
}
} // namespace

std::string_view to_string(CompileStatus s)
{
    switch (s) {
    case CompileStatus::Pass: return "pass";
    case CompileStatus::Fail: return "fail";
    case CompileStatus::Skipped: return "skipped";
    }
    return "skipped";
}

std::size_t VerificationReport::findings() const
{
    std::size_t n = module_level.extra_functions.size();
    for (const auto& [name, f] : per_function)
        n += f.red() ? 1 : 0;
    return n;
}

json VerificationReport::to_json() const
{
    json fns = json::object();
    for (const auto& [name, f] : per_function)
        fns[name] = {{"parse_ok", f.parse_ok},
                     {"signature_match", f.signature_match},
                     {"unknown_callees", f.unknown_callees},
                     {"dropped_calls", f.dropped_calls}};
    json rc = {{"status", to_string(module_level.recompile.status)}};
    if (module_level.recompile.error_class)
        rc["error_class"] = to_string(*module_level.recompile.error_class);
    rc["log"] = module_level.recompile.raw_log;
    return {{"per_function", fns},
            {"module_level",
             {{"all_functions_present", module_level.all_functions_present},
              {"missing_functions", module_level.missing_functions},
              {"extra_functions", module_level.extra_functions},
              {"recompile", rc}}},
            {"findings", findings()}};
}

// --- builtins -----------------------------------------------------------------

Builtins Builtins::load(const std::filesystem::path& file)
{
    std::set<ir::ModuleRef> mods;
    try {
        const auto doc = json::parse(util::read_file(file));
        for (const auto& m : doc.at("modules")) {
            const auto text = m.get<std::string>();
            const auto sep = text.find("::");
            if (sep == std::string::npos)
                throw Error(ErrorKind::ManifestError, file.string(), "module entry without '::': " + text);
            mods.insert({ir::Address::parse(text.substr(0, sep)), text.substr(sep + 2)});
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ManifestError, file.string(), e.what());
    }
    return Builtins(std::move(mods));
}

const Builtins& Builtins::shipped()
{
    static const Builtins b = load(config_dir() / "builtins.json");
    return b;
}

// --- signatures -----------------------------------------------------------------

namespace {

struct ParsedSource {
    seg::SplitResult split;
    ir::Scope scope;
};

ParsedSource parse_source(std::string_view source)
{
    ParsedSource out;
    try {
        out.split = seg::split_functions(source);
        out.scope = ir::parse_module(seg::reassemble(out.split.header, {})).scope;
    } catch (const Error& e) {
        throw Error(ErrorKind::UnparsableSource, e.subject(), e.what(), e.position());
    }
    return out;
}

void sort_unique(std::vector<std::string>& v)
{
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
}

SignatureReport signatures_of(const ir::ModuleIR& ir, const ParsedSource& src)
{
    SignatureReport r;
    std::map<std::string, const seg::FunctionChunk*> chunks;
    for (const auto& c : src.split.chunks)
        chunks[c.name] = &c;
    for (const auto& f : ir.functions) {
        FunctionReport fr;
        const auto it = chunks.find(f.name);
        if (it == chunks.end()) {
            r.missing_functions.push_back(f.name);
        } else {
            try {
                const auto sig = ir::parse_function(it->second->raw_text, src.scope);
                fr.parse_ok = true;
                fr.signature_match = ir::fingerprint(sig) == ir::fingerprint(f);
            } catch (const Error& e) {
                spdlog::debug("function {} does not parse: {}", f.name, e.what());
            }
        }
        r.per_function[f.name] = fr;
    }
    for (const auto& c : src.split.chunks)
        if (!ir.find_function(c.name))
            r.extra_functions.push_back(c.name);
    return r;
}

} // namespace

SignatureReport check_signatures(const ir::ModuleIR& ir, std::string_view source)
{
    return signatures_of(ir, parse_source(source));
}

// --- call graph -------------------------------------------------------------------

namespace {

const std::set<std::string_view>& non_call_words()
{
    static const std::set<std::string_view> w{"if",  "while", "loop", "return", "abort", "let",  "mut",   "move",
                                              "copy", "as",   "else", "break",  "continue", "fun", "spec", "vector",
                                              "match", "phantom"};
    return w;
}

bool type_arg_token(const Token& t)
{
    return t.is_ident() || t.kind == TokenKind::Number || t.is("::") || t.is(",") || t.is("&") || t.is("<") || t.is(">");
}

// Index just past the `<...>` starting at i, or 0 when it is not a type list.
std::size_t skip_type_args(const std::vector<Token>& toks, std::size_t i)
{
    int depth = 0;
    for (std::size_t k = i; k < toks.size(); ++k) {
        if (!type_arg_token(toks[k]))
            return 0;
        if (toks[k].is("<"))
            ++depth;
        else if (toks[k].is(">") && --depth == 0)
            return k + 1;
    }
    return 0;
}

} // namespace

std::vector<CallSite> find_calls(std::string_view function_text)
{
    const auto toks = util::lex(function_text);
    std::size_t i = 0;
    while (i < toks.size() && !toks[i].is("{"))
        ++i;
    std::vector<CallSite> out;
    for (++i; i < toks.size(); ++i) {
        const Token& t = toks[i];
        if (!(t.is_ident() || t.kind == TokenKind::Number))
            continue;
        const bool method = i > 0 && toks[i - 1].is(".");
        if (i > 0 && toks[i - 1].is("::"))
            continue;
        if (t.kind == TokenKind::Number && (i + 1 >= toks.size() || !toks[i + 1].is("::")))
            continue;
        std::string path(t.text);
        std::size_t k = i + 1;
        while (!method && k + 1 < toks.size() && toks[k].is("::") && toks[k + 1].is_ident()) {
            path += "::";
            path += toks[k + 1].text;
            k += 2;
        }
        if (k < toks.size() && toks[k].is("<")) {
            const std::size_t after = skip_type_args(toks, k);
            if (after == 0)
                continue;
            k = after;
        }
        if (k >= toks.size() || !toks[k].is("("))
            continue;
        if (path.find("::") == std::string::npos && non_call_words().contains(path))
            continue;
        out.push_back({method ? "." + path : path, t.line});
    }
    return out;
}

namespace {

enum class Target { Internal, External, Unknown, Ignored };

struct Resolved {
    Target kind = Target::Unknown;
    std::string name; // sibling name for Internal
};

Resolved resolve_call(const std::string& callee, const ir::ModuleIR& ir, const ir::Scope& scope, const Builtins& builtins)
{
    auto is_sibling = [&](std::string_view n) { return ir.find_function(n) != nullptr; };
    auto external = [&](const ir::ModuleRef& m, const std::string& fn) -> Resolved {
        if (m.address == ir.address && m.name == ir.name)
            return is_sibling(fn) ? Resolved{Target::Internal, fn} : Resolved{};
        const bool declared = std::find(ir.dependencies.begin(), ir.dependencies.end(), m) != ir.dependencies.end();
        return declared || builtins.allows(m) ? Resolved{Target::External, {}} : Resolved{};
    };

    if (callee.starts_with(".")) {
        const std::string name = callee.substr(1);
        // Receiver types are not inferred; only sibling methods matter.
        return is_sibling(name) ? Resolved{Target::Internal, name} : Resolved{Target::Ignored, {}};
    }
    std::vector<std::string> parts;
    for (std::size_t pos = 0;;) {
        const auto sep = callee.find("::", pos);
        parts.push_back(callee.substr(pos, sep - pos));
        if (sep == std::string::npos)
            break;
        pos = sep + 2;
    }
    if (parts.size() == 1) {
        if (is_sibling(parts[0]))
            return {Target::Internal, parts[0]};
        if (scope.is_local_struct(parts[0]))
            return {Target::Ignored, {}};
        if (auto m = scope.resolve_member(parts[0]))
            return external(m->module, m->member);
        return {};
    }
    if (parts.size() == 2) {
        if (auto m = scope.resolve_module(parts[0]))
            return external(*m, parts[1]);
        return {};
    }
    if (parts.size() == 3) {
        std::optional<ir::Address> addr = ir::Scope::named_address(parts[0]);
        if (!addr && ir::Address::valid_literal(parts[0]))
            addr = ir::Address::parse(parts[0]);
        if (!addr)
            return {};
        return external({*addr, parts[1]}, parts[2]);
    }
    return {};
}

std::map<std::string, std::set<std::string>> internal_edges_of(const ParsedSource& src, const ir::ModuleIR& ir,
                                                              const Builtins& builtins,
                                                              std::map<std::string, std::vector<std::string>>* unknown)
{
    std::map<std::string, std::set<std::string>> edges;
    for (const auto& c : src.split.chunks) {
        auto& mine = edges[c.name];
        for (const auto& call : find_calls(c.raw_text)) {
            const auto r = resolve_call(call.callee, ir, src.scope, builtins);
            if (r.kind == Target::Internal)
                mine.insert(r.name);
            else if (r.kind == Target::Unknown && unknown)
                (*unknown)[c.name].push_back(call.callee);
        }
        if (unknown && unknown->contains(c.name))
            sort_unique((*unknown)[c.name]);
    }
    return edges;
}

} // namespace

CallgraphReport check_callgraph(const ir::ModuleIR& ir, std::string_view source, std::string_view low_level,
                                const Builtins& builtins)
{
    CallgraphReport r;
    const auto src = parse_source(source);
    r.internal_edges = internal_edges_of(src, ir, builtins, &r.unknown_callees);
    if (!low_level.empty()) {
        const auto low = parse_source(low_level);
        r.low_level_edges = internal_edges_of(low, ir, builtins, nullptr);
        for (const auto& [caller, callees] : r.low_level_edges) {
            const auto it = r.internal_edges.find(caller);
            if (it == r.internal_edges.end())
                continue; // missing function: reported by the signature check
            for (const auto& callee : callees)
                if (!it->second.contains(callee))
                    r.dropped_calls[caller].push_back(callee);
        }
    }
    return r;
}

// --- error patterns -------------------------------------------------------------------

ErrorPatterns ErrorPatterns::load(const std::filesystem::path& file)
{
    std::vector<Rule> rules;
    int version = 0;
    try {
        const auto doc = json::parse(util::read_file(file));
        version = doc.value("version", 0);
        for (const auto& r : doc.at("rules")) {
            const auto cls = error_class_from(r.at("class").get<std::string>());
            if (!cls)
                throw Error(ErrorKind::ManifestError, file.string(), "unknown class " + r.at("class").dump());
            rules.push_back({r.at("pattern").get<std::string>(), *cls});
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ManifestError, file.string(), e.what());
    }
    return ErrorPatterns(std::move(rules), version);
}

const ErrorPatterns& ErrorPatterns::shipped()
{
    static const ErrorPatterns p = load(config_dir() / "error_patterns.json");
    return p;
}

ErrorClass ErrorPatterns::classify(std::string_view log) const
{
    std::size_t best = std::string_view::npos;
    ErrorClass cls = ErrorClass::Other;
    for (const auto& r : rules_) {
        const auto pos = log.find(r.pattern);
        if (pos < best) {
            best = pos;
            cls = r.cls;
        }
    }
    return cls;
}

// --- toolchains -------------------------------------------------------------------------

ToolchainConfig ToolchainConfig::from_env()
{
    ToolchainConfig cfg;
    if (const char* v = std::getenv("MAD_TOOLCHAIN_CMD"); v && *v)
        cfg.command = v;
    if (const char* v = std::getenv("MAD_TOOLCHAIN_TEST_CMD"); v && *v)
        cfg.test_command = v;
    return cfg;
}

bool ToolchainConfig::available() const { return util::command_available(command); }

std::string ToolchainConfig::effective_test_command() const
{
    if (!test_command.empty())
        return test_command;
    static constexpr std::string_view kBuild = "build";
    if (command.ends_with(kBuild))
        return command.substr(0, command.size() - kBuild.size()) + "test";
    return command + " test";
}

std::string ToolchainConfig::manifest() const
{
    std::string out = "[package]\nname = \"" + package_name + "\"\n";
    if (!edition.empty())
        out += "edition = \"" + edition + "\"\n";
    out += "\n[dependencies]\n" + dependencies;
    if (!dependencies.empty() && !dependencies.ends_with('\n'))
        out += '\n';
    out += "\n[addresses]\n" + package_name + " = \"0x0\"\n";
    return out;
}

ShellToolchain::ShellToolchain(ToolchainConfig cfg, const ErrorPatterns& patterns) : cfg_(std::move(cfg)), patterns_(patterns)
{
}

CompileOutcome ShellToolchain::build(const PackageSources& sources)
{
    if (!cfg_.available())
        return CompileOutcome::skipped("toolchain command not found: " + cfg_.command);
    std::optional<util::TempDir> ws;
    try {
        std::filesystem::create_directories(cfg_.temp_root);
        ws.emplace((cfg_.temp_root / "mad-build").string());
        util::write_file_atomic(ws->path() / "Move.toml", cfg_.manifest());
        for (const auto& [name, text] : sources)
            util::write_file_atomic(ws->path() / "sources" / (name + ".move"), text);
    } catch (const std::exception& e) {
        throw Error(ErrorKind::SandboxError, cfg_.temp_root.string(), e.what());
    }
    const auto res = util::run_command(cfg_.command, ws->path());
    if (res.exit_code == 0)
        return {CompileStatus::Pass, std::nullopt, res.output};
    return {CompileStatus::Fail, patterns_.classify(res.output), res.output};
}

std::string package_digest(const PackageSources& sources)
{
    util::Sha256 h;
    for (const auto& [name, text] : sources)
        h.add_part(name).add_part(text);
    return h.hex();
}

RecordedToolchain RecordedToolchain::load(const std::filesystem::path& file)
{
    RecordedToolchain t;
    try {
        const auto doc = json::parse(util::read_file(file));
        for (const auto& [digest, o] : doc.at("outcomes").items()) {
            CompileOutcome out;
            const auto status = o.at("status").get<std::string>();
            if (status == "pass")
                out.status = CompileStatus::Pass;
            else if (status == "fail")
                out.status = CompileStatus::Fail;
            else
                out.status = CompileStatus::Skipped;
            if (out.status == CompileStatus::Fail)
                out.error_class = error_class_from(o.value("error_class", std::string("Other"))).value_or(ErrorClass::Other);
            out.raw_log = o.value("log", std::string());
            t.outcomes_[digest] = out;
        }
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ManifestError, file.string(), e.what());
    }
    return t;
}

void RecordedToolchain::save(const std::filesystem::path& file) const
{
    json outcomes = json::object();
    for (const auto& [digest, o] : outcomes_) {
        json e = {{"status", to_string(o.status)}};
        if (o.error_class)
            e["error_class"] = to_string(*o.error_class);
        e["log"] = o.raw_log;
        outcomes[digest] = e;
    }
    util::write_file_atomic(file, json{{"outcomes", outcomes}}.dump(2) + "\n");
}

CompileOutcome RecordedToolchain::build(const PackageSources& sources)
{
    const auto it = outcomes_.find(package_digest(sources));
    if (it == outcomes_.end())
        return CompileOutcome::skipped("no recorded build outcome for package " + package_digest(sources));
    return it->second;
}

namespace {
std::string module_name_of(std::string_view source)
{
    try {
        const auto toks = util::lex(source);
        for (std::size_t i = 0; i + 3 < toks.size(); ++i)
            if (toks[i].is("module") && (toks[i + 2].is("::") || toks[i + 2].is(".")) && toks[i + 3].is_ident())
                return std::string(toks[i + 3].text);
    } catch (const Error&) {
    }
    return "decompiled";
}
} // namespace

CompileOutcome recompile_package(const PackageSources& sources, Toolchain* toolchain)
{
    if (!toolchain)
        return CompileOutcome::skipped("no toolchain configured");
    return toolchain->build(sources);
}

CompileOutcome recompile(std::string_view source, Toolchain* toolchain)
{
    return recompile_package({{module_name_of(source), std::string(source)}}, toolchain);
}

std::unique_ptr<Toolchain> toolchain_from_env()
{
    auto cfg = ToolchainConfig::from_env();
    if (!cfg.available())
        return nullptr;
    return std::make_unique<ShellToolchain>(cfg);
}

// --- aggregate ---------------------------------------------------------------------------

VerificationReport verify(const ir::ModuleIR& ir, std::string_view low_level, std::string_view decompiled,
                          Toolchain* toolchain, const Builtins& builtins)
{
    VerificationReport rep;
    const auto src = parse_source(decompiled);
    auto sig = signatures_of(ir, src);
    rep.per_function = std::move(sig.per_function);
    rep.module_level.missing_functions = std::move(sig.missing_functions);
    rep.module_level.extra_functions = std::move(sig.extra_functions);

    const auto cg = check_callgraph(ir, decompiled, low_level, builtins);
    for (auto& [name, fr] : rep.per_function) {
        if (auto it = cg.unknown_callees.find(name); it != cg.unknown_callees.end())
            fr.unknown_callees = it->second;
        if (auto it = cg.dropped_calls.find(name); it != cg.dropped_calls.end())
            fr.dropped_calls = it->second;
    }
    rep.module_level.all_functions_present =
        std::all_of(rep.per_function.begin(), rep.per_function.end(), [](const auto& kv) { return kv.second.parse_ok; });
    rep.module_level.recompile = recompile(decompiled, toolchain);
    return rep;
}

} // namespace mad::verify

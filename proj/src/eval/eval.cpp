#include "mad/eval/eval.hpp"

#include "mad/error.hpp"
#include "mad/ir/normalized.hpp"
#include "mad/ir/parser.hpp"
#include "mad/pipeline/pipeline.hpp"
#include "mad/util/fs.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdio>
#include <ctime>
#include <regex>
#include <set>

namespace mad::eval {

using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

// --- manifest -------------------------------------------------------------------

CorpusManifest CorpusManifest::parse(const json& doc, const fs::path& base)
{
    CorpusManifest m;
    auto fail = [](const std::string& where, const std::string& why) { throw Error(ErrorKind::ManifestError, where, why); };
    if (!doc.is_object() || !doc.contains("entries") || !doc["entries"].is_array())
        fail("entries", "expected an array of entries");
    std::set<std::string> ids;
    const auto& entries = doc["entries"];
    for (std::size_t i = 0; i < entries.size(); ++i) {
        const auto& e = entries[i];
        const std::string where = "entries[" + std::to_string(i) + "]";
        if (!e.is_object() || !e.contains("id") || !e["id"].is_string())
            fail(where + ".id", "missing id");
        ManifestEntry out;
        out.id = e["id"].get<std::string>();
        if (!ids.insert(out.id).second)
            fail(where + ".id", "duplicate id '" + out.id + "'");
        out.category = e.value("category", std::string());
        auto path_of = [&](const char* key, bool required) -> fs::path {
            if (!e.contains(key)) {
                if (required)
                    fail(where + "." + key, "missing path");
                return {};
            }
            if (!e[key].is_string())
                fail(where + "." + key, "expected a path string");
            fs::path p = e[key].get<std::string>();
            if (p.is_relative())
                p = base / p;
            if (!fs::exists(p))
                fail(where + "." + key, "no such file: " + p.string());
            return p;
        };
        out.disassembly = path_of("disassembly", false);
        out.normalized = path_of("normalized", false);
        if (out.disassembly.empty() && out.normalized.empty())
            fail(where, "needs a disassembly or a normalized module");
        out.low_level = path_of("low_level", true);
        out.package = path_of("package", false);
        if (auto it = e.find("dependencies"); it != e.end()) {
            if (!it->is_array())
                fail(where + ".dependencies", "expected an array");
            for (const auto& d : *it)
                out.dependencies.push_back(d.get<std::string>());
        }
        m.entries.push_back(std::move(out));
    }
    return m;
}

CorpusManifest CorpusManifest::load(const fs::path& file)
{
    json doc;
    try {
        doc = json::parse(util::read_file(file));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ManifestError, file.string(), e.what());
    } catch (const Error& e) {
        throw Error(ErrorKind::ManifestError, file.string(), e.what());
    }
    return parse(doc, file.parent_path());
}

// --- report ---------------------------------------------------------------------

verify::CompileStatus EntryOutcome::recompile_status() const
{
    if (skip_reason || !verification)
        return verify::CompileStatus::Skipped;
    return verification->module_level.recompile.status;
}

std::size_t EvalReport::attempted() const
{
    return static_cast<std::size_t>(std::count_if(per_entry.begin(), per_entry.end(), [](const EntryOutcome& e) {
        return e.recompile_status() != verify::CompileStatus::Skipped;
    }));
}

std::size_t EvalReport::passed() const
{
    return static_cast<std::size_t>(std::count_if(per_entry.begin(), per_entry.end(), [](const EntryOutcome& e) {
        return e.recompile_status() == verify::CompileStatus::Pass;
    }));
}

std::optional<double> EvalReport::recompute_rate() const
{
    const auto n = attempted();
    if (n == 0)
        return std::nullopt;
    return static_cast<double>(passed()) / static_cast<double>(n);
}

json EvalReport::to_json(bool with_timestamp) const
{
    json entries = json::array();
    for (const auto& e : per_entry) {
        json j = {{"id", e.id}, {"category", e.category}};
        j["recompile"] = to_string(e.recompile_status());
        if (e.skip_reason)
            j["skip_reason"] = *e.skip_reason;
        j["failed_functions"] = e.failed_functions;
        if (e.verification)
            j["verification"] = e.verification->to_json();
        if (e.unit_tests) {
            if (e.unit_tests->skipped)
                j["unit_tests"] = "skipped";
            else
                j["unit_tests"] = {{"passed", e.unit_tests->passed}, {"failed", e.unit_tests->failed}};
        }
        entries.push_back(j);
    }
    json out = {{"config",
                 {{"model_id", model_id},
                  {"arm", prompt.arm()},
                  {"include_domain_knowledge", prompt.include_domain_knowledge},
                  {"include_instructions", prompt.include_instructions},
                  {"include_fewshot", prompt.include_fewshot},
                  {"fewshot_count", prompt.fewshot_count},
                  {"prompt_version", prompt.prompt_version}}},
                {"note", note},
                {"attempted", attempted()},
                {"passed", passed()},
                {"success_rate", success_rate ? json(*success_rate) : json(nullptr)},
                {"per_entry", entries}};
    if (with_timestamp)
        out["timestamp"] = timestamp;
    return out;
}

// --- running ----------------------------------------------------------------------

namespace {

std::string utc_now()
{
    const std::time_t t = std::time(nullptr);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

EntryOutcome run_entry(const ManifestEntry& entry, llm::Backend& backend, const prompt::PromptEngine& engine,
                       const pipeline::Options& popts, verify::Toolchain* toolchain, const RunOptions& opts)
{
    EntryOutcome out;
    out.id = entry.id;
    out.category = entry.category;
    try {
        const auto ir = entry.disassembly.empty() ? ir::parse_normalized(util::read_file(entry.normalized))
                                                  : ir::parse_disassembly(util::read_file(entry.disassembly));
        const auto low = util::read_file(entry.low_level);
        auto res = pipeline::decompile_module(ir, low, engine, backend, popts);
        out.failed_functions = res.failed_functions();
        if (res.any_fixture_miss()) {
            out.skip_reason = "no recorded response for: ";
            for (const auto& c : res.chunks)
                if (c.fixture_miss)
                    *out.skip_reason += c.name + " ";
            out.skip_reason->pop_back();
            return out;
        }
        out.decompiled = res.decompiled;
        out.verification = verify::verify(ir, low, res.decompiled, toolchain);
        if (opts.unit_tests && !entry.package.empty())
            out.unit_tests = run_unit_tests(entry, ir.name, res.decompiled, opts.test_toolchain);
    } catch (const Error& e) {
        spdlog::warn("entry {}: {}", entry.id, e.what());
        out.skip_reason = e.what();
    }
    return out;
}

} // namespace

EvalReport run_corpus(const CorpusManifest& manifest, llm::Backend& backend, const prompt::PromptEngine& engine,
                      const prompt::PromptConfig& prompt_cfg, verify::Toolchain* toolchain, const RunOptions& opts)
{
    EvalReport report;
    report.model_id = backend.model_id();
    report.prompt = prompt_cfg;
    if (report.prompt.prompt_version.empty())
        report.prompt.prompt_version = engine.version();
    report.note = opts.note;

    pipeline::Options popts;
    popts.prompt = report.prompt;
    popts.max_parallel = 1; // the entry loop below owns the parallelism

    const auto n = static_cast<std::ptrdiff_t>(manifest.entries.size());
    report.per_entry.resize(manifest.entries.size());
    const int threads = static_cast<int>(std::max<std::size_t>(1, opts.max_parallel));
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads)
    for (std::ptrdiff_t i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        report.per_entry[k] = run_entry(manifest.entries[k], backend, engine, popts, toolchain, opts);
    }
    (void)threads; // unused without OpenMP

    report.success_rate = report.recompute_rate();
    report.timestamp = utc_now();
    return report;
}

std::vector<AblationRow> run_ablation(const CorpusManifest& manifest, llm::Backend& backend,
                                      const prompt::PromptEngine& engine, verify::Toolchain* toolchain,
                                      const RunOptions& opts)
{
    std::vector<AblationRow> rows;
    for (const auto& arm : prompt::ablation_arms()) {
        auto cfg = engine.config(arm.arm());
        rows.push_back({arm.arm(), run_corpus(manifest, backend, engine, cfg, toolchain, opts)});
    }
    return rows;
}

// --- unit tests --------------------------------------------------------------------

std::optional<std::pair<int, int>> parse_test_counts(std::string_view log)
{
    static const std::regex kResult(R"(Test result: (OK|FAILED)\. Total tests: ([0-9]+); passed: ([0-9]+); failed: ([0-9]+))");
    std::match_results<std::string_view::const_iterator> m;
    if (!std::regex_search(log.begin(), log.end(), m, kResult))
        return std::nullopt;
    return std::pair{std::stoi(m[3].str()), std::stoi(m[4].str())};
}

UnitTestOutcome run_unit_tests(const ManifestEntry& entry, std::string_view module_name, std::string_view decompiled,
                               const verify::ToolchainConfig& toolchain)
{
    UnitTestOutcome out;
    const auto command = toolchain.effective_test_command();
    if (!util::command_available(command)) {
        out.skipped = true;
        out.log = "toolchain missing: " + command;
        return out;
    }
    if (entry.package.empty() || !fs::is_directory(entry.package))
        throw Error(ErrorKind::ManifestError, entry.id, "entry has no package directory");

    util::TempDir ws("mad-tests");
    fs::copy(entry.package, ws.path(), fs::copy_options::recursive);
    // the module's own file if it exists, otherwise the file that declares it
    fs::path target = ws.path() / "sources" / (std::string(module_name) + ".move");
    if (!fs::exists(target)) {
        const std::regex decl("module\\s+[A-Za-z0-9_]+::" + std::string(module_name) + "\\b");
        for (const auto& f : fs::recursive_directory_iterator(ws.path() / "sources"))
            if (f.path().extension() == ".move" && std::regex_search(util::read_file(f.path()), decl))
                target = f.path();
    }
    util::write_file_atomic(target, std::string(decompiled));
    const auto res = util::run_command(command, ws.path());
    out.log = res.output;
    if (auto counts = parse_test_counts(res.output)) {
        out.passed = counts->first;
        out.failed = counts->second;
    }
    return out;
}

// --- rendering ----------------------------------------------------------------------

std::string format_rate(std::optional<double> rate)
{
    if (!rate)
        return "n/a";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.1f", *rate * 100.0);
    return buf;
}

namespace {

struct Row {
    std::string model, config, note, rate;
    std::size_t passed, attempted;
    std::optional<double> value;
};

Row row_of(const EvalReport& r, const std::string& config)
{
    return {r.model_id, config, r.note, format_rate(r.success_rate), r.passed(), r.attempted(), r.success_rate};
}

std::string csv_field(const std::string& s)
{
    if (s.find_first_of(",\"\n") == std::string::npos)
        return s;
    std::string out = "\"";
    for (char c : s)
        out += c == '"' ? std::string("\"\"") : std::string(1, c);
    return out + "\"";
}

std::string md_field(const std::string& s)
{
    std::string out;
    for (char c : s)
        out += c == '|' ? std::string("\\|") : std::string(1, c);
    return out;
}

std::string render_rows(const std::vector<Row>& rows, std::string_view format)
{
    std::string out;
    if (format == "md" || format == "markdown") {
        out = "| Model | Config | Note | Success rate (%) | Passed / attempted |\n";
        out += "|---|---|---|---:|---:|\n";
        for (const auto& r : rows)
            out += "| " + md_field(r.model) + " | " + md_field(r.config) + " | " + md_field(r.note) + " | " + r.rate + " | " +
                   std::to_string(r.passed) + "/" + std::to_string(r.attempted) + " |\n";
        return out;
    }
    if (format == "csv") {
        out = "model,config,note,success_rate,passed,attempted\n";
        for (const auto& r : rows)
            out += csv_field(r.model) + "," + csv_field(r.config) + "," + csv_field(r.note) + "," + r.rate + "," +
                   std::to_string(r.passed) + "," + std::to_string(r.attempted) + "\n";
        return out;
    }
    if (format == "json") {
        json arr = json::array();
        for (const auto& r : rows)
            arr.push_back({{"model", r.model},
                           {"config", r.config},
                           {"note", r.note},
                           {"success_rate", r.value ? json(*r.value) : json(nullptr)},
                           {"rendered", r.rate},
                           {"passed", r.passed},
                           {"attempted", r.attempted}});
        return arr.dump(2) + "\n";
    }
    throw Error(ErrorKind::UnknownFormat, std::string(format), "expected md, csv or json");
}

} // namespace

std::string render_report(const std::vector<EvalReport>& reports, std::string_view format)
{
    std::vector<Row> rows;
    for (const auto& r : reports)
        rows.push_back(row_of(r, r.prompt.arm()));
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.value.has_value() != b.value.has_value())
            return a.value.has_value();
        return a.value && *a.value > *b.value;
    });
    return render_rows(rows, format);
}

std::string render_report(const EvalReport& report, std::string_view format)
{
    return render_report(std::vector<EvalReport>{report}, format);
}

std::string render_ablation(const std::vector<AblationRow>& rows, std::string_view format)
{
    std::vector<Row> out;
    for (const auto& r : rows)
        out.push_back(row_of(r.report, r.arm));
    return render_rows(out, format);
}

} // namespace mad::eval

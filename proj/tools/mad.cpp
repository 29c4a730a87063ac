#include "mad/config.hpp"
#include "mad/error.hpp"
#include "mad/eval/eval.hpp"
#include "mad/ir/normalized.hpp"
#include "mad/ir/parser.hpp"
#include "mad/ir/render.hpp"
#include "mad/llm/client.hpp"
#include "mad/pipeline/pipeline.hpp"
#include "mad/seg/segmentation.hpp"
#include "mad/service/http_server.hpp"
#include "mad/util/digest.hpp"
#include "mad/util/fs.hpp"
#include "mad/util/http.hpp"
#include "mad/util/lexer.hpp"
#include "mad/verify/verifier.hpp"

#include <CLI11.hpp>
#include <httplib.h>
#include <json.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <csignal>
#include <iostream>
#include <thread>

using namespace mad;
namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

ir::ModuleIR load_ir(const fs::path& path)
{
    const auto text = util::read_file(path);
    return path.extension() == ".json" ? ir::parse_normalized(text) : ir::parse_disassembly(text);
}

void emit(const std::string& text, const std::string& out)
{
    if (out.empty() || out == "-")
        std::cout << text << (text.ends_with('\n') ? "" : "\n");
    else
        util::write_file_atomic(out, text);
}

struct BackendOpts {
    std::string kind = "mock";
    std::string fixtures;
    std::string model;
    std::size_t parallel = 4;

    void add(CLI::App* app)
    {
        app->add_option("--backend", kind, "mock | recorded | remote")->capture_default_str();
        app->add_option("--fixtures", fixtures, "recorded response store (recorded backend)");
        app->add_option("--model", model, "model id (remote backend; MAD_MODEL)");
        app->add_option("--parallel", parallel, "concurrent function chunks")->capture_default_str();
    }
    std::unique_ptr<llm::Backend> make() const
    {
        llm::ModelConfig cfg;
        cfg.backend = llm::backend_from_string(kind);
        cfg.apply_env();
        if (!model.empty())
            cfg.model_id = model;
        cfg.fixture_dir = fixtures;
        cfg.max_parallel = parallel;
        cfg.validate();
        return llm::make_backend(cfg);
    }
};

prompt::PromptEngine load_engine(const std::string& dir)
{
    return prompt::PromptEngine(prompt::load_prompt_assets(dir.empty() ? prompts_dir() : fs::path(dir)));
}

/// "recorded:<file>" replays outcomes, anything else is a shell command,
/// empty falls back to MAD_TOOLCHAIN_CMD.
std::unique_ptr<verify::Toolchain> make_toolchain(const std::string& spec)
{
    if (spec.starts_with("recorded:"))
        return std::make_unique<verify::RecordedToolchain>(verify::RecordedToolchain::load(spec.substr(9)));
    if (spec.empty())
        return verify::toolchain_from_env();
    auto cfg = verify::ToolchainConfig::from_env();
    cfg.command = spec;
    if (!cfg.available())
        throw Error(ErrorKind::ToolchainMissing, spec, "command not found");
    return std::make_unique<verify::ShellToolchain>(cfg);
}

httplib::Client client_for(const std::string& server)
{
    httplib::Client cli(util::parse_url(server).scheme_host_port);
    cli.set_read_timeout(std::chrono::seconds(60));
    return cli;
}

json request(httplib::Result res)
{
    if (!res)
        throw Error(ErrorKind::RpcError, "0", "service unreachable: " + httplib::to_string(res.error()));
    json body = json::parse(res->body, nullptr, false);
    if (res->status >= 400)
        throw std::runtime_error("HTTP " + std::to_string(res->status) + ": " +
                                 (body.is_discarded() ? res->body : body.value("message", res->body)));
    return body;
}

json poll(httplib::Client& cli, json job)
{
    std::size_t last = static_cast<std::size_t>(-1);
    while (job["state"] != "complete" && job["state"] != "failed") {
        std::this_thread::sleep_for(std::chrono::milliseconds(200));
        job = request(cli.Get("/api/jobs/" + job["job_id"].get<std::string>()));
        if (job["done"].get<std::size_t>() != last) {
            last = job["done"];
            std::cerr << job["state"].get<std::string>() << " " << last << "/" << job["total"] << "\n";
        }
    }
    return job;
}

service::HttpServer* g_server = nullptr;
void on_signal(int)
{
    if (g_server)
        g_server->stop();
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Move decompiler: split, prompt, decompile, verify, evaluate, serve"};
    app.require_subcommand(1);
    bool verbose = false;
    std::string prompts;
    app.add_flag("-v,--verbose", verbose, "debug logging");
    app.add_option("--prompts", prompts, "prompt assets directory (default: shipped assets)");

    // ir
    auto* ir_cmd = app.add_subcommand("ir", "parse a disassembly or normalized JSON module");
    std::string ir_in, ir_format = "normalized", out;
    ir_cmd->add_option("input", ir_in, ".disasm/.mvasm text or normalized .json")->required()->check(CLI::ExistingFile);
    ir_cmd->add_option("--format", ir_format, "normalized | interface | stub")
        ->check(CLI::IsMember({"normalized", "interface", "stub"}))
        ->capture_default_str();
    ir_cmd->add_option("-o,--out", out, "output file (default stdout)");

    // split
    auto* split_cmd = app.add_subcommand("split", "segment low-level source into function chunks");
    std::string split_in, split_ir;
    bool split_context = false;
    split_cmd->add_option("input", split_in, "low-level source")->required()->check(CLI::ExistingFile);
    split_cmd->add_option("--ir", split_ir, "module IR, joins signatures and builds contexts")->check(CLI::ExistingFile);
    split_cmd->add_flag("--context", split_context, "print each chunk's context too");

    // prompt
    auto* prompt_cmd = app.add_subcommand("prompt", "compose the prompt for one function");
    std::string p_ir, p_low, p_fn, arm = "full";
    prompt_cmd->add_option("--ir", p_ir)->required()->check(CLI::ExistingFile);
    prompt_cmd->add_option("--low-level", p_low)->required()->check(CLI::ExistingFile);
    prompt_cmd->add_option("--function", p_fn)->required();
    prompt_cmd->add_option("--arm", arm, "full | no-domain | no-instructions | no-fewshot")->capture_default_str();

    // decompile
    auto* dec_cmd = app.add_subcommand("decompile", "decompile one module");
    std::string d_ir, d_low, d_toolchain;
    bool d_verify = false;
    BackendOpts d_backend;
    dec_cmd->add_option("--ir", d_ir)->required()->check(CLI::ExistingFile);
    dec_cmd->add_option("--low-level", d_low)->required()->check(CLI::ExistingFile);
    dec_cmd->add_option("--arm", arm)->capture_default_str();
    dec_cmd->add_flag("--verify", d_verify, "print the verification report to stderr");
    dec_cmd->add_option("--toolchain", d_toolchain, "build command or recorded:<file> (default MAD_TOOLCHAIN_CMD)");
    dec_cmd->add_option("-o,--out", out);
    d_backend.add(dec_cmd);

    // eval
    auto* eval_cmd = app.add_subcommand("eval", "run the corpus and report the recompilation success rate");
    std::string e_manifest, e_format = "md", e_toolchain, e_note;
    bool e_unit = false;
    BackendOpts e_backend;
    eval_cmd->add_option("--manifest", e_manifest)->required()->check(CLI::ExistingFile);
    eval_cmd->add_option("--arm", arm, "an ablation arm, or 'all'")->capture_default_str();
    eval_cmd->add_option("--toolchain", e_toolchain, "build command or recorded:<file> (default MAD_TOOLCHAIN_CMD)");
    eval_cmd->add_option("--format", e_format, "md | csv | json")->capture_default_str();
    eval_cmd->add_option("--note", e_note, "free text for the report's note column");
    eval_cmd->add_flag("--unit-tests", e_unit, "run original package tests against the output");
    eval_cmd->add_option("-o,--out", out);
    e_backend.add(eval_cmd);

    // serve
    auto* serve_cmd = app.add_subcommand("serve", "run the HTTP service");
    std::string host = "127.0.0.1", cache_dir = ".mad-cache", s_toolchain;
    int port = 8080;
    std::size_t workers = 2;
    BackendOpts s_backend;
    serve_cmd->add_option("--host", host)->capture_default_str();
    serve_cmd->add_option("--port", port)->capture_default_str();
    serve_cmd->add_option("--cache", cache_dir)->capture_default_str();
    serve_cmd->add_option("--workers", workers)->capture_default_str();
    serve_cmd->add_option("--toolchain", s_toolchain, "build command or recorded:<file> (default MAD_TOOLCHAIN_CMD)");
    s_backend.add(serve_cmd);

    // submit / view / redecompile against a running service
    std::string server = "http://127.0.0.1:8080", package, module, view = "decompiled", function;
    std::vector<std::string> uploads;
    bool wait = false;
    auto* submit_cmd = app.add_subcommand("submit", "submit a package id or uploaded modules to a service");
    submit_cmd->add_option("--server", server)->capture_default_str();
    auto* pkg_opt = submit_cmd->add_option("--package", package, "on-chain package id");
    submit_cmd->add_option("--upload", uploads, "IR_FILE:LOW_LEVEL_FILE, repeatable")->excludes(pkg_opt);
    submit_cmd->add_option("--arm", arm)->capture_default_str();
    submit_cmd->add_flag("--wait", wait, "poll until the job finishes");

    auto* view_cmd = app.add_subcommand("view", "fetch one view of a decompiled module");
    view_cmd->add_option("--server", server)->capture_default_str();
    view_cmd->add_option("--package", package)->required();
    view_cmd->add_option("--module", module, "omit to list modules");
    view_cmd->add_option("--view", view, "bytecode | disassembly | low_level | interface | decompiled")->capture_default_str();

    auto* redo_cmd = app.add_subcommand("redecompile", "re-run one function on a service");
    redo_cmd->add_option("--server", server)->capture_default_str();
    redo_cmd->add_option("--package", package)->required();
    redo_cmd->add_option("--module", module)->required();
    redo_cmd->add_option("--function", function)->required();
    redo_cmd->add_flag("--wait", wait);

    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(verbose ? spdlog::level::debug : spdlog::level::warn);
    // stdout carries results only
    auto logger = spdlog::stderr_color_mt("mad");
    logger->set_level(spdlog::get_level());
    spdlog::set_default_logger(logger);

    try {
        if (*ir_cmd) {
            const auto m = load_ir(ir_in);
            if (ir_format == "normalized")
                emit(ir::to_normalized(m).dump(2), out);
            else
                emit(ir_format == "interface" ? ir::render_interface(m) : ir::render_stub_module(m), out);
        } else if (*split_cmd) {
            const auto src = util::read_file(split_in);
            const auto res = split_ir.empty() ? seg::split_functions(src) : seg::segment(src, load_ir(split_ir));
            for (const auto& c : res.chunks) {
                std::cout << "== " << c.name << " (" << c.raw_text.size() << " bytes)\n";
                if (split_context && !c.context.empty())
                    std::cout << "-- context\n" << c.context << "\n-- function\n";
                std::cout << c.raw_text << "\n";
            }
            const auto back = seg::reassemble(
                res.header, [&] {
                    std::vector<std::pair<std::string, std::string>> o;
                    for (const auto& c : res.chunks)
                        o.emplace_back(c.name, c.raw_text);
                    return o;
                }());
            std::cerr << res.chunks.size() << " functions; round trip "
                      << (back == src ? "exact" : util::token_equivalent(back, src) ? "token-equivalent" : "differs") << "\n";
        } else if (*prompt_cmd) {
            const auto engine = load_engine(prompts);
            const auto m = load_ir(p_ir);
            const auto res = seg::segment(util::read_file(p_low), m);
            const auto it = std::find_if(res.chunks.begin(), res.chunks.end(), [&](const auto& c) { return c.name == p_fn; });
            if (it == res.chunks.end())
                throw Error(ErrorKind::UnknownFunction, p_fn, "not in the low-level source");
            const auto bundle = engine.compose(*it, engine.config(arm));
            std::cout << json::parse(bundle.serialize()).dump(2) << "\n";
            std::cerr << "char_count " << bundle.char_count << ", digest " << bundle.digest() << "\n";
        } else if (*dec_cmd) {
            const auto engine = load_engine(prompts);
            auto backend = d_backend.make();
            const auto m = load_ir(d_ir);
            const auto low = util::read_file(d_low);
            pipeline::Options opts;
            opts.prompt = engine.config(arm);
            opts.max_parallel = d_backend.parallel;
            const auto res = pipeline::decompile_module(m, low, engine, *backend, opts);
            emit(res.decompiled, out);
            for (const auto& c : res.chunks)
                if (!c.ok())
                    std::cerr << "warning: " << c.name << " kept its low-level text: " << c.error << "\n";
            if (d_verify) {
                auto tc = d_toolchain.empty() && !verify::ToolchainConfig::from_env().available() ? nullptr
                                                                                                   : make_toolchain(d_toolchain);
                std::cerr << verify::verify(m, low, res.decompiled, tc.get()).to_json().dump(2) << "\n";
            }
            return res.complete() ? 0 : 2;
        } else if (*eval_cmd) {
            const auto engine = load_engine(prompts);
            auto backend = e_backend.make();
            const auto manifest = eval::CorpusManifest::load(e_manifest);
            auto tc = e_toolchain.empty() && !verify::ToolchainConfig::from_env().available() ? nullptr
                                                                                              : make_toolchain(e_toolchain);
            if (!tc)
                std::cerr << "warning: no toolchain (set MAD_TOOLCHAIN_CMD or --toolchain); success rate is n/a\n";
            eval::RunOptions opts;
            opts.max_parallel = e_backend.parallel;
            opts.unit_tests = e_unit;
            opts.test_toolchain = verify::ToolchainConfig::from_env();
            if (!e_toolchain.empty() && !e_toolchain.starts_with("recorded:"))
                opts.test_toolchain.command = e_toolchain;
            opts.note = e_note;
            if (arm == "all") {
                emit(eval::render_ablation(eval::run_ablation(manifest, *backend, engine, tc.get(), opts), e_format), out);
            } else {
                const auto report = eval::run_corpus(manifest, *backend, engine, engine.config(arm), tc.get(), opts);
                emit(e_format == "json" ? report.to_json().dump(2) : eval::render_report(report, e_format), out);
            }
        } else if (*serve_cmd) {
            auto backend = s_backend.make();
            auto tc = s_toolchain.empty() && !verify::ToolchainConfig::from_env().available() ? nullptr
                                                                                              : make_toolchain(s_toolchain);
            service::ServiceConfig cfg;
            cfg.cache_root = cache_dir;
            cfg.workers = workers;
            cfg.max_parallel = s_backend.parallel;
            cfg.apply_env();
            service::Service svc(cfg, load_engine(prompts), *backend, tc.get(),
                                 std::make_shared<service::ChainClient>(service::ChainClient::from_env()));
            service::HttpServer http(svc);
            g_server = &http;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cerr << "serving on http://" << host << ":" << port << " (backend " << backend->model_id() << ")\n";
            http.listen(host, port);
        } else if (*submit_cmd) {
            json body = {{"arm", arm}};
            if (!package.empty()) {
                body["package_id"] = package;
            } else {
                if (uploads.empty())
                    throw Error(ErrorKind::InvalidRequest, "submit", "give --package or at least one --upload");
                body["modules"] = json::array();
                for (const auto& u : uploads) {
                    const auto colon = u.find(':');
                    if (colon == std::string::npos)
                        throw Error(ErrorKind::InvalidRequest, u, "expected IR_FILE:LOW_LEVEL_FILE");
                    const fs::path ir_path = u.substr(0, colon);
                    json m = {{"low_level", util::read_file(u.substr(colon + 1))}};
                    if (ir_path.extension() == ".json")
                        m["normalized"] = json::parse(util::read_file(ir_path));
                    else
                        m["disassembly"] = util::read_file(ir_path);
                    body["modules"].push_back(m);
                }
            }
            auto cli = client_for(server);
            auto job = request(cli.Post("/api/decompile", body.dump(), "application/json"));
            if (wait)
                job = poll(cli, job);
            std::cout << job.dump(2) << "\n";
            return job["state"] == "failed" ? 1 : 0;
        } else if (*view_cmd) {
            auto cli = client_for(server);
            if (module.empty()) {
                const auto listing = request(cli.Get("/api/packages/" + package + "/modules"));
                for (const auto& m : listing["modules"])
                    std::cout << m.get<std::string>() << "\n";
            } else {
                std::cout << request(cli.Get("/api/packages/" + package + "/modules/" + module + "/views/" + view))["content"]
                                 .get<std::string>();
            }
        } else if (*redo_cmd) {
            auto cli = client_for(server);
            auto job = request(cli.Post("/api/packages/" + package + "/modules/" + module + "/functions/" + function +
                                            "/redecompile",
                                        "", "application/json"));
            if (wait)
                job = poll(cli, job);
            std::cout << job.dump(2) << "\n";
            return job["state"] == "failed" ? 1 : 0;
        }
    } catch (const std::exception& e) {
        std::cerr << "mad: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

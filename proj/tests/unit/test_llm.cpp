#include "mad/error.hpp"
#include "mad/llm/client.hpp"
#include "mad/util/fs.hpp"
#include "mad/util/lexer.hpp"
#include "support/fixtures.hpp"

#include <doctest.h>
#include <httplib.h>
#include <json.hpp>

#include <thread>

using namespace mad;
using namespace mad::llm;
using json = nlohmann::json;

namespace {

prompt::PromptBundle bundle_for(const std::string& fn, const std::string& extra = {})
{
    prompt::PromptBundle b;
    b.system_sections.emplace_back("instructions", "Be precise.");
    b.user_payload = prompt::format_request("module 0x1::m {}", fn) + extra;
    b.char_count = prompt::char_length(b.user_payload) + 11;
    return b;
}

/// In-process HTTP server on an ephemeral port, stopped on destruction.
struct StubServer {
    httplib::Server server;
    int port = 0;
    std::thread thread;

    template <class Handler>
    explicit StubServer(const std::string& path, Handler h)
    {
        server.Post(path, h);
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~StubServer()
    {
        server.stop();
        thread.join();
    }
    std::string url(const std::string& path) const { return "http://127.0.0.1:" + std::to_string(port) + path; }
};

std::string completion(const std::string& content)
{
    return json{{"choices", json::array({json{{"message", {{"role", "assistant"}, {"content", content}}}}})}}.dump();
}

ModelConfig remote_cfg(const std::string& url)
{
    ModelConfig cfg;
    cfg.backend = BackendKind::Remote;
    cfg.model_id = "stub-model";
    cfg.endpoint = url;
    cfg.api_key = "sk-test";
    cfg.backoff = std::chrono::milliseconds(5);
    cfg.timeout = std::chrono::milliseconds(2000);
    return cfg;
}

class ScriptedBackend : public Backend {
public:
    explicit ScriptedBackend(std::vector<std::string> replies) : replies_(std::move(replies)) {}
    std::string model_id() const override { return "scripted"; }
    std::vector<std::string> payloads;

protected:
    std::string respond(const prompt::PromptBundle& b, const std::string&) override
    {
        payloads.push_back(b.user_payload);
        return replies_.at(payloads.size() - 1);
    }

private:
    std::vector<std::string> replies_;
};

} // namespace

TEST_CASE("mock renames low-level names deterministically")
{
    const std::string fn = "public fun f(arg0: &Counter, arg1: u64) : u64 {\n    let v0 = arg0.value + arg1;\n    v0\n}";
    const std::string expected =
        "public fun f(target: &Counter, amount: u64) : u64 {\n    let result = target.value + amount;\n    result\n}";
    CHECK(MockBackend::rename_locals(fn, 0) == expected);
    CHECK(MockBackend::rename_locals(fn, 0) == MockBackend::rename_locals(fn, 0));
    // A different attempt picks different words but keeps the token structure.
    const auto rotated = MockBackend::rename_locals(fn, 1);
    CHECK(rotated != expected);
    const auto a = util::lex(fn), b = util::lex(rotated);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].kind == b[i].kind);
        if (!(a[i].text.starts_with("arg") || a[i].text.starts_with("v")))
            CHECK(a[i].text == b[i].text);
    }
    // Existing identifiers are never captured.
    CHECK(MockBackend::rename_locals("fun g(arg0: u64, target: u64) { }", 0) == "fun g(target_2: u64, target: u64) { }");
    // Field names and path segments keep their spelling.
    CHECK(MockBackend::rename_locals("fun h(arg0: &S) { arg0.v0; m::v0(); }", 0) == "fun h(target: &S) { target.v0; m::v0(); }");
}

TEST_CASE("mock output is a single parsable function for every corpus chunk")
{
    MockBackend mock;
    for (const auto& stem : test::corpus_stems(".move")) {
        auto split = seg::split_functions(test::corpus_file(stem, ".move"));
        for (const auto& c : split.chunks) {
            CAPTURE(c.name);
            auto r = mock.complete(bundle_for(c.raw_text));
            auto code = extract_code(r.response_text);
            auto out = seg::parse_function_output(code, c.name);
            CHECK(out.name == c.name);
            CHECK(code.find("arg0") == std::string::npos);
        }
    }
    CHECK(mock.calls() > 30);
    auto b = bundle_for("fun f(arg0: u64) { }", "\nRegeneration attempt 3");
    CHECK(mock.complete(b).response_text.find("fun f(item: u64)") != std::string::npos);
}

TEST_CASE("recorded backend")
{
    util::TempDir dir("mad-rec");
    const auto b1 = bundle_for("fun a() {}");
    const auto b2 = bundle_for("fun b() {}");
    {
        FixtureStore store(dir.path(), "gpt-test");
        store.put(b1.digest(), "```move\nfun a() { 1 }\n```");
        store.flush();
    }
    RecordedBackend rec(dir.path());
    CHECK(rec.model_id() == "gpt-test");
    auto r = rec.complete(b1);
    CHECK(r.response_text == "```move\nfun a() { 1 }\n```");
    CHECK(r.prompt_digest == b1.digest());
    CHECK(r.model_id == "gpt-test");
    try {
        rec.complete(b2);
        FAIL("no error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::FixtureMiss);
        CHECK(e.subject() == b2.digest());
    }
    CHECK(rec.calls() == 2);
    CHECK_THROWS_WITH_AS(RecordedBackend(dir.path() / "missing"), doctest::Contains("Io"), Error);
}

TEST_CASE("recording a run produces a complete store")
{
    util::TempDir dir("mad-rec2");
    MockBackend mock;
    FixtureStore store(dir.path(), mock.model_id());
    RecordingBackend recorder(mock, store);
    std::vector<prompt::PromptBundle> bundles{bundle_for("fun a(arg0: u8) {}"), bundle_for("fun b(arg1: u8) {}")};
    std::vector<std::string> live;
    for (const auto& b : bundles)
        live.push_back(recorder.complete(b).response_text);
    store.flush();
    RecordedBackend replay(dir.path());
    for (std::size_t i = 0; i < bundles.size(); ++i)
        CHECK(replay.complete(bundles[i]).response_text == live[i]);
}

TEST_CASE("extract_code selection rule")
{
    CHECK(extract_code("```move\nfun f() {}\n```") == "fun f() {}\n");
    CHECK(extract_code("Sure! Here it is:\n```\npublic fun f() {}\n```\nLet me know.") == "public fun f() {}\n");
    CHECK(extract_code("```text\nThe function adds two numbers.\n```\nCode:\n```move\nuse sui::coin;\nfun f() {}\n```\n") ==
          "use sui::coin;\nfun f() {}\n");
    CHECK(extract_code("```\nfirst\n```\n```\nsecond\n```") == "first\n");
    CHECK(extract_code("```move\nfun cut() {\n") == "fun cut() {\n");
    CHECK_THROWS_WITH_AS(extract_code("no code here"), doctest::Contains("ExtractionFailed"), Error);
    CHECK_THROWS_WITH_AS(extract_code("```\n\n```"), doctest::Contains("ExtractionFailed"), Error);
    for (const char* r : {"```move\nfun f() {}\n```", "x\n```\nfun g() {}\n```\n```\nfun h() {}\n```"})
        CHECK(extract_code(r).find("```") == std::string::npos);
}

TEST_CASE("extraction failure re-prompts exactly once")
{
    ScriptedBackend ok({"I think the function does X.", "```move\nfun f() {}\n```"});
    auto d = complete_and_extract(ok, bundle_for("fun f() {}"));
    CHECK(d.reprompted);
    CHECK(d.code == "fun f() {}\n");
    REQUIRE(ok.payloads.size() == 2);
    CHECK(ok.payloads[1].ends_with(kReprompt));
    CHECK_FALSE(ok.payloads[0].ends_with(kReprompt));

    ScriptedBackend bad({"nope", "still nope", "never asked"});
    CHECK_THROWS_WITH_AS(complete_and_extract(bad, bundle_for("fun f() {}")), doctest::Contains("ExtractionFailed"), Error);
    CHECK(bad.calls() == 2);
}

TEST_CASE("remote backend wire format")
{
    json seen;
    std::string auth;
    StubServer stub("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        seen = json::parse(req.body);
        auth = req.get_header_value("Authorization");
        res.set_content(completion("```move\nfun f() {}\n```"), "application/json");
    });
    RemoteBackend remote(remote_cfg(stub.url("/v1/chat/completions")));
    auto b = bundle_for("fun f() {}");
    b.fewshot_pairs.emplace_back("in", "out");
    auto r = remote.complete(b);
    CHECK(r.response_text == "```move\nfun f() {}\n```");
    CHECK(r.model_id == "stub-model");
    CHECK(auth == "Bearer sk-test");
    CHECK(seen["model"] == "stub-model");
    CHECK(seen["temperature"] == 0.0);
    CHECK(seen["seed"] == 123);
    REQUIRE(seen["messages"].size() == 4);
    CHECK(seen["messages"][0]["role"] == "system");
    CHECK(seen["messages"][1]["role"] == "user");
    CHECK(seen["messages"][2]["role"] == "assistant");
    CHECK(seen["messages"][3]["content"] == b.user_payload);
}

TEST_CASE("remote backend retries")
{
    std::atomic<int> hits{0};
    SUBCASE("5xx then success")
    {
        StubServer stub("/c", [&](const httplib::Request&, httplib::Response& res) {
            if (++hits < 3) {
                res.status = 503;
                res.set_content("busy", "text/plain");
            } else {
                res.set_content(completion("done"), "application/json");
            }
        });
        RemoteBackend remote(remote_cfg(stub.url("/c")));
        CHECK(remote.complete(bundle_for("fun f() {}")).response_text == "done");
        CHECK(hits == 3);
    }
    SUBCASE("5xx exhausted")
    {
        StubServer stub("/c", [&](const httplib::Request&, httplib::Response& res) {
            ++hits;
            res.status = 500;
            res.set_content("boom", "text/plain");
        });
        RemoteBackend remote(remote_cfg(stub.url("/c")));
        try {
            remote.complete(bundle_for("fun f() {}"));
            FAIL("no error");
        } catch (const Error& e) {
            CHECK(e.kind() == ErrorKind::RemoteError);
            CHECK(e.subject() == "500");
            CHECK(e.detail() == "boom");
        }
        CHECK(hits == 3);
    }
    SUBCASE("4xx is not retried")
    {
        StubServer stub("/c", [&](const httplib::Request&, httplib::Response& res) {
            ++hits;
            res.status = 401;
        });
        RemoteBackend remote(remote_cfg(stub.url("/c")));
        CHECK_THROWS_WITH_AS(remote.complete(bundle_for("fun f() {}")), doctest::Contains("RemoteError(401)"), Error);
        CHECK(hits == 1);
    }
    SUBCASE("connection refused")
    {
        int port;
        {
            StubServer stub("/c", [](const httplib::Request&, httplib::Response&) {});
            port = stub.port;
        }
        RemoteBackend remote(remote_cfg("http://127.0.0.1:" + std::to_string(port) + "/c"));
        CHECK_THROWS_WITH_AS(remote.complete(bundle_for("fun f() {}")), doctest::Contains("RemoteError"), Error);
    }
    SUBCASE("timeout")
    {
        StubServer stub("/c", [&](const httplib::Request&, httplib::Response& res) {
            std::this_thread::sleep_for(std::chrono::milliseconds(400));
            res.set_content(completion("late"), "application/json");
        });
        auto cfg = remote_cfg(stub.url("/c"));
        cfg.timeout = std::chrono::milliseconds(100);
        cfg.retries = 0;
        RemoteBackend remote(cfg);
        CHECK_THROWS_WITH_AS(remote.complete(bundle_for("fun f() {}")), doctest::Contains("Timeout"), Error);
    }
}

TEST_CASE("remote admission gate bounds concurrency")
{
    std::atomic<int> active{0}, peak{0};
    StubServer stub("/c", [&](const httplib::Request&, httplib::Response& res) {
        int now = ++active;
        int p = peak.load();
        while (now > p && !peak.compare_exchange_weak(p, now)) {
        }
        std::this_thread::sleep_for(std::chrono::milliseconds(60));
        --active;
        res.set_content(completion("ok"), "application/json");
    });
    auto cfg = remote_cfg(stub.url("/c"));
    cfg.max_parallel = 2;
    RemoteBackend remote(cfg);
    std::vector<std::thread> workers;
    for (int i = 0; i < 6; ++i)
        workers.emplace_back([&] { remote.complete(bundle_for("fun f() {}")); });
    for (auto& w : workers)
        w.join();
    CHECK(remote.calls() == 6);
    CHECK(remote.peak_in_flight() <= 2);
    CHECK(peak.load() <= 2);
    CHECK(peak.load() >= 1);
}

TEST_CASE("model config")
{
    ModelConfig cfg;
    CHECK(cfg.temperature == 0.0);
    CHECK(cfg.seed == 123);
    CHECK(cfg.retries == 2);
    cfg.temperature = -1;
    CHECK_THROWS_AS(cfg.validate(), Error);
    cfg.temperature = 0;
    cfg.max_parallel = 0;
    CHECK_THROWS_AS(cfg.validate(), Error);
    CHECK(backend_from_string("recorded") == BackendKind::Recorded);
    CHECK_THROWS_AS(backend_from_string("gpt"), Error);
    setenv("MAD_MODEL", "env-model", 1);
    ModelConfig env;
    env.apply_env();
    CHECK(env.model_id == "env-model");
    unsetenv("MAD_MODEL");
}

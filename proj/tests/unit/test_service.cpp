#include "mad/error.hpp"
#include "mad/ir/normalized.hpp"
#include "mad/ir/parser.hpp"
#include "mad/ir/render.hpp"
#include "mad/seg/segmentation.hpp"
#include "mad/service/cache.hpp"
#include "mad/service/chain.hpp"
#include "mad/service/http_server.hpp"
#include "mad/service/service.hpp"
#include "mad/util/digest.hpp"
#include "mad/util/fs.hpp"
#include "support/fixtures.hpp"

#include <doctest.h>
#include <httplib.h>

#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <thread>

using namespace mad;
using namespace mad::service;
using json = nlohmann::ordered_json;
namespace fs = std::filesystem;

namespace {

const prompt::PromptEngine& engine()
{
    static const prompt::PromptEngine e(prompt::load_prompt_assets(fs::path(MAD_SOURCE_DIR) / "prompts"));
    return e;
}

// Mock answers, delayed so that a job stays observable while it runs.
class SlowMock : public llm::Backend {
public:
    explicit SlowMock(std::chrono::milliseconds delay) : delay_(delay) {}
    std::string model_id() const override { return "mock-renamer"; }

protected:
    std::string respond(const prompt::PromptBundle& b, const std::string&) override
    {
        std::this_thread::sleep_for(delay_);
        llm::MockBackend mock;
        return mock.complete(b).response_text;
    }

private:
    std::chrono::milliseconds delay_;
};

const std::vector<std::string> kUploadStems{"01_counter", "02_vault", "10_range"};

json upload_body(const std::vector<std::string>& stems = kUploadStems)
{
    json modules = json::array();
    for (const auto& stem : stems) {
        const auto disasm = test::corpus_file(stem, ".disasm");
        modules.push_back({{"disassembly", disasm},
                           {"low_level", test::corpus_file(stem, ".move")},
                           // opaque stand-in for the module bytes
                           {"bytecode", util::base64_encode("bytes of " + stem)}});
    }
    return {{"modules", modules}};
}

ServiceConfig config(const fs::path& root)
{
    ServiceConfig c;
    c.cache_root = root;
    c.workers = 2;
    c.max_parallel = 4;
    return c;
}

std::string module_name(const std::string& stem) { return ir::parse_disassembly(test::corpus_file(stem, ".disasm")).name; }

const std::string kPid = "0x" + std::string(60, '0') + "beef";

// Minimal fullnode: one package holding the counter module. Its "bytecode"
// is the low-level source so that `cat` can stand in for the decompiler.
struct StubRpc {
    httplib::Server server;
    std::thread thread;
    int port = 0;
    std::atomic<int> requests{0};

    StubRpc()
    {
        server.Post("/", [this](const httplib::Request& req, httplib::Response& res) {
            ++requests;
            const auto r = json::parse(req.body);
            const std::string method = r["method"];
            const std::string id = r["params"][0];
            json body = {{"jsonrpc", "2.0"}, {"id", r["id"]}};
            if (id != kPid) {
                if (method == "sui_getObject")
                    body["result"] = {{"error", {{"code", "notExists"}, {"object_id", id}}}};
                else
                    body["error"] = {{"code", -32602}, {"message", "Package object does not exist"}};
            } else if (method == "sui_getObject") {
                body["result"] = {{"data",
                                   {{"objectId", kPid},
                                    {"bcs",
                                     {{"dataType", "package"},
                                      {"moduleMap", {{"counter", util::base64_encode(test::corpus_file("01_counter", ".move"))}}}}}}}};
            } else if (method == "sui_getNormalizedMoveModulesByPackage") {
                body["result"] = {{"counter", json::parse(test::corpus_file("01_counter", ".json"))}};
            } else {
                body["error"] = {{"code", -32601}, {"message", "method not found"}};
            }
            res.set_content(body.dump(), "application/json");
        });
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~StubRpc()
    {
        server.stop();
        thread.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port) + "/"; }
};

// A port nothing listens on: bound once, then closed.
int closed_port()
{
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    ::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr);
    socklen_t len = sizeof addr;
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&addr), &len);
    ::close(fd);
    return ntohs(addr.sin_port);
}

} // namespace

TEST_CASE("package ids are 64 hex digits")
{
    CHECK(normalize_package_id(std::string(64, 'A')) == "0x" + std::string(64, 'a'));
    CHECK(normalize_package_id(kPid) == kPid);
    CHECK_THROWS_WITH(normalize_package_id("0x" + std::string(63, 'a')), doctest::Contains("InvalidPackageId"));
    CHECK_THROWS_WITH(normalize_package_id("0x" + std::string(63, 'a') + "g"), doctest::Contains("InvalidPackageId"));
    CHECK_THROWS_WITH(normalize_package_id("0x2"), doctest::Contains("InvalidPackageId"));
}

TEST_CASE("chain client against a stub fullnode")
{
    StubRpc rpc;
    ChainClient client(rpc.url(), 1, std::chrono::seconds(5), std::chrono::milliseconds(1));

    const auto pkg = client.fetch_package(kPid);
    REQUIRE(pkg.normalized.size() == 1);
    const auto ir = ir::parse_normalized_doc(pkg.normalized.at("counter"));
    CHECK(ir.name == "counter");
    CHECK(ir.functions.size() == 5);
    const auto bytes = util::base64_decode(pkg.bytecode.at("counter"));
    CHECK(std::string(bytes.begin(), bytes.end()) == test::corpus_file("01_counter", ".move"));

    CHECK_THROWS_WITH(client.fetch_package("0x" + std::string(64, '1')), doctest::Contains("PackageNotFound"));
    CHECK_THROWS_WITH(client.call("sui_getNormalizedMoveModulesByPackage", json::array({"0x" + std::string(64, '1')})),
                      doctest::Contains("PackageNotFound"));
    CHECK_THROWS_WITH(client.call("no_such_method", json::array({kPid})), doctest::Contains("RpcError"));
}

TEST_CASE("chain client reports refused connections after retrying")
{
    ChainClient client("http://127.0.0.1:" + std::to_string(closed_port()) + "/", 2, std::chrono::seconds(2),
                       std::chrono::milliseconds(1));
    try {
        client.fetch_package(kPid);
        FAIL("expected RpcError");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::RpcError);
    }
}

TEST_CASE("cache store versions and keys")
{
    util::TempDir dir("mad-cache");
    CacheStore store(dir.path());
    const auto k1 = CacheStore::key("digest", "model", "v1", "full");
    CHECK(k1 == CacheStore::key("digest", "model", "v1", "full"));
    CHECK(k1 != CacheStore::key("digest", "model", "v1", "no-domain"));
    CHECK(k1 != CacheStore::key("digest", "model", "v2", "full"));
    CHECK_FALSE(store.contains(k1));
    CHECK_FALSE(store.load(k1).has_value());

    CacheEntry e;
    e.key = k1;
    e.package_id = "local-x";
    e.config = {{"arm", "full"}};
    ModuleEntry m;
    for (const auto& v : view_names())
        m.views[v] = "text of " + v + "\nwith two lines\n";
    m.ir = {{"name", "m"}};
    m.verification = {{"findings", 0}};
    e.modules["m"] = m;

    std::vector<std::thread> writers;
    for (int i = 0; i < 4; ++i)
        writers.emplace_back([&] { store.write(e); });
    for (auto& t : writers)
        t.join();
    CHECK(store.versions(k1) == std::vector<unsigned>{1, 2, 3, 4});
    const auto back = store.load(k1, 2u);
    REQUIRE(back);
    CHECK(back->version == 2);
    CHECK(back->modules.at("m").views == m.views);
    CHECK(back->modules.at("m").verification == m.verification);
    CHECK(store.load(k1)->version == 4);

    // nothing half-written is left behind
    for (const auto& entry : fs::directory_iterator(dir.path() / k1))
        CHECK(entry.path().filename().string().starts_with("v"));

    store.bind_package("local-x", "digest");
    CHECK(CacheStore(dir.path()).package_digest("local-x") == "digest");
    CHECK_FALSE(store.package_digest("local-y"));
}

TEST_CASE("submit validation")
{
    util::TempDir dir("mad-svc");
    llm::MockBackend mock;
    auto cfg = config(dir.path());
    cfg.max_upload_bytes = 4096;
    Service svc(cfg, engine(), mock, nullptr, nullptr);

    SubmitRequest bad_id;
    bad_id.package_id = "0x" + std::string(63, 'a');
    CHECK_THROWS_WITH(svc.submit(bad_id), doctest::Contains("InvalidPackageId"));

    CHECK_THROWS_WITH(svc.submit(SubmitRequest::from_json(upload_body())), doctest::Contains("UploadTooLarge"));
    CHECK_THROWS_WITH(svc.submit(SubmitRequest{}), doctest::Contains("InvalidRequest"));
    CHECK_THROWS_WITH(SubmitRequest::from_json({{"modules", 3}}), doctest::Contains("InvalidRequest"));
    CHECK_THROWS_WITH(SubmitRequest::from_json({{"package_id", kPid}, {"arm", "nope"}}), doctest::Contains("InvalidRequest"));
    CHECK_THROWS_WITH(svc.job("job-missing"), doctest::Contains("UnknownJob"));
    CHECK_THROWS_WITH(svc.view("local-0", "m", "decompiled"), doctest::Contains("PackageNotFound"));
    CHECK_THROWS_WITH(svc.view("local-0", "m", "assembly"), doctest::Contains("UnknownView"));

    // no chain endpoint: the job fails, it does not hang
    SubmitRequest chain;
    chain.package_id = kPid;
    const auto st = svc.wait(svc.submit(chain));
    CHECK(st.state == JobState::Failed);
    CHECK(st.reason.find("RpcError") != std::string::npos);
}

TEST_CASE("offline upload over HTTP serves five views and hits the cache on resubmit")
{
    const auto t0 = std::chrono::steady_clock::now();
    util::TempDir dir("mad-svc");
    llm::MockBackend mock;
    Service svc(config(dir.path()), engine(), mock, nullptr, nullptr);
    HttpServer http(svc);
    const int port = http.start();
    httplib::Client cli("127.0.0.1", port);

    auto health = cli.Get("/api/health");
    REQUIRE(health);
    CHECK(health->status == 200);
    CHECK(health->get_header_value("Access-Control-Allow-Origin") == "*");

    const auto body = upload_body().dump();
    auto res = cli.Post("/api/decompile", body, "application/json");
    REQUIRE(res);
    CHECK(res->status == 202);
    auto job = json::parse(res->body);
    const std::string job_id = job["job_id"];
    const std::string pid = job["package_id"];
    CHECK(pid.starts_with("local-"));

    for (int i = 0; i < 500 && job["state"] != "complete" && job["state"] != "failed"; ++i) {
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
        res = cli.Get("/api/jobs/" + job_id);
        REQUIRE(res);
        job = json::parse(res->body);
    }
    REQUIRE(job["state"] == "complete");
    CHECK(job["done"] == job["total"]);
    CHECK(job["total"].get<int>() > 0);
    const auto calls = mock.calls();
    CHECK(calls == job["total"].get<std::size_t>());

    res = cli.Get("/api/packages/" + pid + "/modules");
    REQUIRE(res);
    const auto mods = json::parse(res->body)["modules"];
    CHECK(mods.size() == kUploadStems.size());

    for (const auto& stem : kUploadStems) {
        const auto name = module_name(stem);
        for (const auto& view : view_names()) {
            res = cli.Get("/api/packages/" + pid + "/modules/" + name + "/views/" + view);
            REQUIRE(res);
            CHECK(res->status == 200);
            const std::string content = json::parse(res->body)["content"];
            CHECK_FALSE(content.empty());
            if (view == "interface")
                CHECK(content == ir::render_interface(ir::parse_disassembly(test::corpus_file(stem, ".disasm"))));
            if (view == "low_level")
                CHECK(content == test::corpus_file(stem, ".move"));
            if (view == "bytecode")
                CHECK(content == util::base64_encode("bytes of " + stem));
            if (view == "decompiled")
                CHECK(content.find("arg0") == std::string::npos);
        }
        res = cli.Get("/api/packages/" + pid + "/modules/" + name + "/verification");
        REQUIRE(res);
        CHECK(res->status == 200);
    }

    // resubmission: complete at once, zero backend calls
    res = cli.Post("/api/decompile", body, "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    const auto again = json::parse(res->body);
    CHECK(again["state"] == "complete");
    CHECK(again["package_id"] == pid);
    CHECK(mock.calls() == calls);

    // error mapping
    auto status_of = [&](httplib::Result r) { return r ? r->status : -1; };
    CHECK(status_of(cli.Post("/api/decompile", json({{"package_id", "0x" + std::string(63, 'a')}}).dump(),
                             "application/json")) == 400);
    CHECK(status_of(cli.Post("/api/decompile", "{not json", "application/json")) == 400);
    CHECK(status_of(cli.Get("/api/jobs/job-nope")) == 404);
    CHECK(status_of(cli.Get("/api/packages/" + pid + "/modules/counter/views/assembly")) == 404);
    CHECK(status_of(cli.Get("/api/packages/local-none/modules/counter/views/decompiled")) == 404);
    CHECK(status_of(cli.Post("/api/packages/" + pid + "/modules/counter/functions/nope/redecompile", "", "application/json")) == 404);

    http.stop();
    CHECK(std::chrono::steady_clock::now() - t0 < std::chrono::seconds(10));
}

TEST_CASE("oversized upload maps to 413 and a running job to 409")
{
    util::TempDir dir("mad-svc");
    SlowMock slow(std::chrono::milliseconds(40));
    auto cfg = config(dir.path());
    cfg.max_upload_bytes = 1u << 20;
    Service svc(cfg, engine(), slow, nullptr, nullptr);
    HttpServer http(svc);
    httplib::Client cli("127.0.0.1", http.start());

    json huge = upload_body({"01_counter"});
    huge["modules"][0]["bytecode"] = util::base64_encode(std::string(2u << 20, 'x'));
    auto res = cli.Post("/api/decompile", huge.dump(), "application/json");
    REQUIRE(res);
    CHECK(res->status == 413);

    res = cli.Post("/api/decompile", upload_body({"01_counter"}).dump(), "application/json");
    REQUIRE(res);
    const auto job = json::parse(res->body);
    const std::string pid = job["package_id"];
    res = cli.Get("/api/packages/" + pid + "/modules/counter/views/decompiled");
    REQUIRE(res);
    CHECK(res->status == 409);
    CHECK(svc.wait(job["job_id"]).state == JobState::Complete);
}

TEST_CASE("job progress is monotone")
{
    util::TempDir dir("mad-svc");
    SlowMock slow(std::chrono::milliseconds(5));
    auto cfg = config(dir.path());
    cfg.max_parallel = 2;
    Service svc(cfg, engine(), slow, nullptr, nullptr);
    const auto id = svc.submit(SubmitRequest::from_json(upload_body()));

    std::vector<JobStatus> seen;
    for (;;) {
        seen.push_back(svc.job(id));
        if (seen.back().terminal())
            break;
        std::this_thread::sleep_for(std::chrono::milliseconds(1));
    }
    REQUIRE(seen.back().state == JobState::Complete);
    for (std::size_t i = 1; i < seen.size(); ++i) {
        CHECK(static_cast<int>(seen[i].state) >= static_cast<int>(seen[i - 1].state));
        CHECK(seen[i].done >= seen[i - 1].done);
        CHECK(seen[i].done <= seen[i].total);
        if (seen[i].state != JobState::Complete && seen[i].total > 0 && seen[i].state != JobState::Verifying)
            CHECK(seen[i].done <= seen[i].total);
    }
    CHECK(seen.back().done == seen.back().total);
    CHECK(seen.size() > 2); // actually observed intermediate states
}

TEST_CASE("redecompile changes one function and writes a new version")
{
    util::TempDir dir("mad-svc");
    llm::MockBackend mock;
    Service svc(config(dir.path()), engine(), mock, nullptr, nullptr);
    const auto first = svc.wait(svc.submit(SubmitRequest::from_json(upload_body({"01_counter"}))));
    REQUIRE(first.state == JobState::Complete);
    CHECK(first.cache_version == 1);
    const auto pid = first.package_id;
    const auto before = svc.view(pid, "counter", "decompiled");
    const auto calls = mock.calls();

    CHECK_THROWS_WITH(svc.redecompile(pid, "counter", "nope"), doctest::Contains("UnknownFunction"));
    CHECK_THROWS_WITH(svc.redecompile(pid, "vault", "create"), doctest::Contains("PackageNotFound"));

    const auto st = svc.wait(svc.redecompile(pid, "counter", "set_value"));
    REQUIRE(st.state == JobState::Complete);
    CHECK(st.kind == "redecompile");
    CHECK(st.cache_version == 2);
    CHECK(mock.calls() == calls + 1);

    const auto after = svc.view(pid, "counter", "decompiled");
    CHECK(after != before);
    // character diff: common prefix and suffix must cover everything outside set_value
    std::size_t pre = 0;
    while (pre < before.size() && pre < after.size() && before[pre] == after[pre])
        ++pre;
    std::size_t suf = 0;
    while (suf < before.size() - pre && suf < after.size() - pre &&
           before[before.size() - 1 - suf] == after[after.size() - 1 - suf])
        ++suf;
    const auto head = before.find("fun set_value(");
    REQUIRE(head != std::string::npos);
    const auto next = before.find("\n    public fun value(", head);
    REQUIRE(next != std::string::npos);
    CHECK(pre >= head);
    CHECK(before.size() - suf <= next);

    // the earlier version is still on disk untouched
    const auto key = CacheStore(dir.path()).load(CacheStore::key(
        *CacheStore(dir.path()).package_digest(pid), mock.model_id(), engine().version(), "full"), 1u);
    REQUIRE(key);
    CHECK(key->modules.at("counter").views.at("decompiled") == before);
}

TEST_CASE("a restarted service serves identical views from the cache")
{
    util::TempDir dir("mad-svc");
    std::map<std::string, std::string> views;
    std::string pid;
    {
        llm::MockBackend mock;
        Service svc(config(dir.path()), engine(), mock, nullptr, nullptr);
        const auto st = svc.wait(svc.submit(SubmitRequest::from_json(upload_body())));
        REQUIRE(st.state == JobState::Complete);
        pid = st.package_id;
        for (const auto& m : svc.modules(pid))
            for (const auto& v : view_names())
                views[m + "/" + v] = svc.view(pid, m, v);
    }
    llm::MockBackend fresh;
    Service svc(config(dir.path()), engine(), fresh, nullptr, nullptr);
    CHECK(svc.modules(pid).size() == kUploadStems.size());
    for (const auto& m : svc.modules(pid))
        for (const auto& v : view_names())
            CHECK(svc.view(pid, m, v) == views.at(m + "/" + v));
    const auto st = svc.wait(svc.submit(SubmitRequest::from_json(upload_body())));
    CHECK(st.state == JobState::Complete);
    CHECK(fresh.calls() == 0);
}

TEST_CASE("chain package end to end through the stub fullnode")
{
    StubRpc rpc;
    util::TempDir dir("mad-svc");
    llm::MockBackend mock;
    auto cfg = config(dir.path());
    cfg.lowlevel_cmd = "cat";
    auto chain = std::make_shared<ChainClient>(rpc.url(), 1, std::chrono::seconds(5), std::chrono::milliseconds(1));
    Service svc(cfg, engine(), mock, nullptr, chain);

    SubmitRequest req;
    req.package_id = kPid;
    const auto st = svc.wait(svc.submit(req));
    REQUIRE_MESSAGE(st.state == JobState::Complete, st.reason);
    CHECK(st.package_id == kPid);
    CHECK(svc.view(kPid, "counter", "low_level") == test::corpus_file("01_counter", ".move"));
    CHECK(svc.view(kPid, "counter", "bytecode") == util::base64_encode(test::corpus_file("01_counter", ".move")));
    CHECK(svc.view(kPid, "counter", "disassembly").find("module 0xa11ce::counter") != std::string::npos);
    CHECK_FALSE(svc.view(kPid, "counter", "decompiled").empty());

    // cached by package id; no RPC traffic and no completions
    const auto calls = mock.calls();
    const int requests = rpc.requests.load();
    CHECK(svc.wait(svc.submit(req)).state == JobState::Complete);
    CHECK(mock.calls() == calls);
    CHECK(rpc.requests.load() == requests);

    SubmitRequest missing;
    missing.package_id = "0x" + std::string(64, '1');
    const auto failed = svc.wait(svc.submit(missing));
    CHECK(failed.state == JobState::Failed);
    CHECK(failed.reason.find("PackageNotFound") != std::string::npos);
}

TEST_CASE("chain packages need a low-level decompiler")
{
    StubRpc rpc;
    util::TempDir dir("mad-svc");
    llm::MockBackend mock;
    Service svc(config(dir.path()), engine(), mock, nullptr,
                std::make_shared<ChainClient>(rpc.url(), 0, std::chrono::seconds(5), std::chrono::milliseconds(1)));
    SubmitRequest req;
    req.package_id = kPid;
    const auto st = svc.wait(svc.submit(req));
    CHECK(st.state == JobState::Failed);
    CHECK(st.reason.find("MAD_LOWLEVEL_CMD") != std::string::npos);
    CHECK(mock.calls() == 0);
}

#include "mad/llm/client.hpp"

#include "mad/error.hpp"
#include "mad/util/digest.hpp"
#include "mad/util/fs.hpp"
#include "mad/util/http.hpp"
#include "mad/util/lexer.hpp"

#include <json.hpp>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <regex>
#include <set>
#include <thread>

namespace mad::llm {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string_view to_string(BackendKind k)
{
    switch (k) {
    case BackendKind::Recorded: return "recorded";
    case BackendKind::Mock: return "mock";
    case BackendKind::Remote: return "remote";
    }
    return "?";
}

BackendKind backend_from_string(std::string_view s)
{
    if (s == "recorded")
        return BackendKind::Recorded;
    if (s == "mock")
        return BackendKind::Mock;
    if (s == "remote")
        return BackendKind::Remote;
    throw Error(ErrorKind::InvalidRequest, std::string(s), "backend must be recorded, mock or remote");
}

void ModelConfig::apply_env()
{
    if (const char* v = std::getenv("MAD_ENDPOINT"); v && *v)
        endpoint = v;
    if (const char* v = std::getenv("MAD_API_KEY"); v && *v)
        api_key = v;
    if (const char* v = std::getenv("MAD_MODEL"); v && *v)
        model_id = v;
}

void ModelConfig::validate() const
{
    if (temperature < 0)
        throw Error(ErrorKind::InvalidRequest, "temperature", "must be >= 0");
    if (max_parallel == 0)
        throw Error(ErrorKind::InvalidRequest, "max_parallel", "must be >= 1");
    if (backend == BackendKind::Remote && endpoint.empty())
        throw Error(ErrorKind::InvalidRequest, "endpoint", "remote backend needs MAD_ENDPOINT");
}

CompletionRecord Backend::complete(const prompt::PromptBundle& bundle)
{
    calls_.fetch_add(1);
    CompletionRecord r;
    r.prompt_digest = bundle.digest();
    r.model_id = model_id();
    const auto start = std::chrono::steady_clock::now();
    r.response_text = respond(bundle, r.prompt_digest);
    r.latency_ms =
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
    r.usage.prompt_chars = bundle.char_count;
    r.usage.completion_chars = prompt::char_length(r.response_text);
    return r;
}

// --- recorded ---------------------------------------------------------------

RecordedBackend::RecordedBackend(const fs::path& dir) : dir_(dir)
{
    const fs::path index = dir / "index.json";
    json doc;
    try {
        doc = json::parse(util::read_file(index));
    } catch (const json::exception& e) {
        throw Error(ErrorKind::ManifestError, index.string(), e.what());
    }
    if (!doc.is_object() || !doc.contains("entries") || !doc["entries"].is_object())
        throw Error(ErrorKind::ManifestError, index.string(), "expected {\"model_id\", \"entries\": {digest: file}}");
    model_id_ = doc.value("model_id", std::string("recorded"));
    for (const auto& [digest, file] : doc["entries"].items()) {
        if (!file.is_string())
            throw Error(ErrorKind::ManifestError, index.string(), "entry " + digest + " is not a file name");
        entries_[digest] = file.get<std::string>();
    }
}

std::string RecordedBackend::respond(const prompt::PromptBundle&, const std::string& digest)
{
    const auto it = entries_.find(digest);
    if (it == entries_.end())
        throw Error(ErrorKind::FixtureMiss, digest, "no recorded response in " + dir_.string());
    return util::read_file(dir_ / it->second);
}

FixtureStore::FixtureStore(fs::path dir, std::string model_id) : dir_(std::move(dir)), model_id_(std::move(model_id))
{
    fs::create_directories(dir_);
    const fs::path index = dir_ / "index.json";
    if (fs::exists(index)) {
        auto doc = json::parse(util::read_file(index));
        for (const auto& [digest, file] : doc["entries"].items())
            entries_[digest] = file.get<std::string>();
    }
}

void FixtureStore::put(const std::string& digest, const std::string& response)
{
    const std::string file = digest + ".txt";
    util::write_file_atomic(dir_ / file, response);
    std::lock_guard lock(mu_);
    entries_[digest] = file;
}

void FixtureStore::flush() const
{
    json doc;
    doc["model_id"] = model_id_;
    json entries = json::object();
    {
        std::lock_guard lock(mu_);
        for (const auto& [digest, file] : entries_)
            entries[digest] = file;
    }
    doc["entries"] = entries;
    util::write_file_atomic(dir_ / "index.json", doc.dump(2) + "\n");
}

std::string RecordingBackend::respond(const prompt::PromptBundle& bundle, const std::string& digest)
{
    auto r = inner_.complete(bundle);
    store_.put(digest, r.response_text);
    return r.response_text;
}

// --- mock -------------------------------------------------------------------

namespace {

// Fenced blocks of a markdown text: (info string, content).
std::vector<std::pair<std::string, std::string>> fenced_blocks(std::string_view text)
{
    std::vector<std::pair<std::string, std::string>> out;
    std::size_t pos = 0;
    bool inside = false;
    std::string info, content;
    while (pos < text.size()) {
        auto eol = text.find('\n', pos);
        if (eol == std::string_view::npos)
            eol = text.size();
        std::string_view line = text.substr(pos, eol - pos);
        std::string_view stripped = line;
        while (!stripped.empty() && (stripped.front() == ' ' || stripped.front() == '\t'))
            stripped.remove_prefix(1);
        if (stripped.starts_with("```")) {
            if (!inside) {
                inside = true;
                info = std::string(stripped.substr(3));
                content.clear();
            } else {
                inside = false;
                out.emplace_back(info, content);
            }
        } else if (inside) {
            content += line;
            content += '\n';
        }
        pos = eol + 1;
    }
    if (inside) // truncated reply: keep what arrived
        out.emplace_back(info, content);
    return out;
}

const std::vector<std::string_view>& param_words()
{
    static const std::vector<std::string_view> w{"target", "amount", "recipient", "item", "config", "owner",
                                                 "count",  "limit",  "data",      "key",  "entry",  "state"};
    return w;
}

const std::vector<std::string_view>& local_words()
{
    static const std::vector<std::string_view> w{"result", "value", "total", "current", "index", "record",
                                                 "stored", "next",  "found", "sum",     "amount_left", "cursor"};
    return w;
}

} // namespace

std::string MockBackend::rename_locals(std::string_view function_text, std::size_t attempt)
{
    static const std::regex kArg("arg([0-9]+)");
    static const std::regex kLocal("v([0-9]+)");
    const auto toks = util::lex(function_text, true);

    std::set<std::string, std::less<>> taken;
    for (const auto& t : toks)
        if (t.is_ident())
            taken.emplace(t.text);

    std::map<std::string, std::string, std::less<>> renames;
    auto fresh = [&](std::string_view base) {
        std::string name(base);
        for (int n = 2; taken.contains(name); ++n)
            name = std::string(base) + "_" + std::to_string(n);
        taken.insert(name);
        return name;
    };
    for (const auto& t : toks) {
        if (!t.is_ident() || renames.contains(t.text))
            continue;
        std::cmatch m;
        const std::string text(t.text);
        if (std::regex_match(text.c_str(), m, kArg)) {
            const auto& w = param_words();
            renames[text] = fresh(w[(std::stoul(m[1].str()) + attempt) % w.size()]);
        } else if (std::regex_match(text.c_str(), m, kLocal)) {
            const auto& w = local_words();
            renames[text] = fresh(w[(std::stoul(m[1].str()) + attempt) % w.size()]);
        }
    }

    std::string out;
    std::size_t last = 0;
    for (std::size_t i = 0; i < toks.size(); ++i) {
        const auto& t = toks[i];
        if (!t.is_ident())
            continue;
        // Field accesses (`x.v0`) and path segments keep their spelling.
        if (i > 0 && (toks[i - 1].is(".") || toks[i - 1].is("::")))
            continue;
        const auto it = renames.find(t.text);
        if (it == renames.end())
            continue;
        out.append(function_text.substr(last, t.offset - last));
        out += it->second;
        last = t.end();
    }
    out.append(function_text.substr(last));
    return out;
}

std::string MockBackend::respond(const prompt::PromptBundle& bundle, const std::string&)
{
    const auto blocks = fenced_blocks(bundle.user_payload);
    if (blocks.empty())
        return "I could not find a function to decompile.";
    std::size_t attempt = 0;
    static const std::regex kAttempt("Regeneration attempt ([0-9]+)");
    std::smatch m;
    if (std::regex_search(bundle.user_payload, m, kAttempt))
        attempt = std::stoul(m[1].str());
    std::string body = rename_locals(blocks.back().second, attempt);
    while (!body.empty() && body.back() == '\n')
        body.pop_back();
    return "Here is the decompiled function:\n\n```move\n" + body + "\n```\n";
}

// --- remote -----------------------------------------------------------------

RemoteBackend::RemoteBackend(ModelConfig cfg)
    : cfg_(std::move(cfg)), gate_(static_cast<std::ptrdiff_t>(std::max<std::size_t>(1, cfg_.max_parallel)))
{
    cfg_.validate();
}

std::string RemoteBackend::respond(const prompt::PromptBundle& bundle, const std::string&)
{
    json req;
    req["model"] = cfg_.model_id;
    req["temperature"] = cfg_.temperature;
    req["seed"] = cfg_.seed;
    req["messages"] = json::parse(bundle.serialize());
    const std::string body = req.dump();
    util::Headers headers;
    if (!cfg_.api_key.empty())
        headers.emplace_back("Authorization", "Bearer " + cfg_.api_key);

    struct Slot {
        RemoteBackend& self;
        explicit Slot(RemoteBackend& s) : self(s)
        {
            self.gate_.acquire();
            const auto now = self.in_flight_.fetch_add(1) + 1;
            auto peak = self.peak_.load();
            while (now > peak && !self.peak_.compare_exchange_weak(peak, now)) {
            }
        }
        ~Slot()
        {
            self.in_flight_.fetch_sub(1);
            self.gate_.release();
        }
    };

    util::HttpResult last;
    for (unsigned attempt = 0; attempt <= cfg_.retries; ++attempt) {
        if (attempt > 0)
            std::this_thread::sleep_for(cfg_.backoff * (1u << (attempt - 1)));
        {
            Slot slot(*this);
            last = util::http_post_json(cfg_.endpoint, body, headers, cfg_.timeout);
        }
        if (!last.transport_error() && last.status < 500)
            break;
        spdlog::warn("remote completion attempt {} failed: {}", attempt + 1,
                     last.transport_error() ? last.error : "HTTP " + std::to_string(last.status));
    }
    if (last.transport_error()) {
        if (last.timed_out)
            throw Error(ErrorKind::Timeout, cfg_.endpoint, last.error);
        throw Error(ErrorKind::RemoteError, "0", last.error);
    }
    if (last.status != 200)
        throw Error(ErrorKind::RemoteError, std::to_string(last.status), last.body.substr(0, 2000));
    try {
        const auto doc = json::parse(last.body);
        return doc.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception& e) {
        throw Error(ErrorKind::RemoteError, "200", std::string("malformed completion: ") + e.what());
    }
}

std::unique_ptr<Backend> make_backend(const ModelConfig& cfg)
{
    cfg.validate();
    switch (cfg.backend) {
    case BackendKind::Recorded: return std::make_unique<RecordedBackend>(cfg.fixture_dir);
    case BackendKind::Mock: return std::make_unique<MockBackend>();
    case BackendKind::Remote: return std::make_unique<RemoteBackend>(cfg);
    }
    throw Error(ErrorKind::InvalidRequest, "backend");
}

// --- extraction -------------------------------------------------------------

std::string extract_code(std::string_view response_text)
{
    static const std::set<std::string_view> kDeclStart{"fun",    "public", "entry", "native", "inline",
                                                       "module", "use",    "#",     "macro",  "friend"};
    const auto blocks = fenced_blocks(response_text);
    std::vector<std::string> code;
    for (const auto& [info, content] : blocks) {
        bool blank = content.find_first_not_of(" \t\r\n") == std::string::npos;
        if (!blank)
            code.push_back(content);
    }
    if (code.empty())
        throw Error(ErrorKind::ExtractionFailed, "response", "no fenced block with code");
    if (code.size() == 1)
        return code.front();
    for (const auto& c : code) {
        try {
            const auto toks = util::lex(c);
            if (!toks.empty() && kDeclStart.contains(toks.front().text))
                return c;
        } catch (const Error&) {
            // prose that does not lex as code
        }
    }
    return code.front();
}

Decompilation complete_and_extract(Backend& backend, const prompt::PromptBundle& bundle)
{
    Decompilation d;
    d.record = backend.complete(bundle);
    try {
        d.code = extract_code(d.record.response_text);
        return d;
    } catch (const Error& e) {
        if (e.kind() != ErrorKind::ExtractionFailed)
            throw;
    }
    prompt::PromptBundle again = bundle;
    again.user_payload += "\n\n";
    again.user_payload += kReprompt;
    again.char_count += prompt::char_length("\n\n") + prompt::char_length(kReprompt);
    d.record = backend.complete(again);
    d.reprompted = true;
    d.code = extract_code(d.record.response_text);
    return d;
}

} // namespace mad::llm

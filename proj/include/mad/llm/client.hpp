#pragma once

#include "mad/prompt/prompt.hpp"

#include <atomic>
#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>

namespace mad::llm {

enum class BackendKind { Recorded, Mock, Remote };
std::string_view to_string(BackendKind k);
/// "recorded" | "mock" | "remote"; throws InvalidRequest.
BackendKind backend_from_string(std::string_view s);

struct ModelConfig {
    BackendKind backend = BackendKind::Mock;
    std::string model_id = "mock-renamer";
    double temperature = 0.0;
    std::int64_t seed = 123;
    std::string endpoint;
    std::string api_key;
    std::size_t max_parallel = 4;
    unsigned retries = 2;
    std::chrono::milliseconds timeout{120000};
    std::chrono::milliseconds backoff{250};
    /// Recorded backend store (directory with index.json).
    std::filesystem::path fixture_dir;

    /// Fills endpoint / api_key / model_id from MAD_ENDPOINT, MAD_API_KEY,
    /// MAD_MODEL when set.
    void apply_env();
    /// Throws InvalidRequest when temperature < 0 or max_parallel == 0.
    void validate() const;
};

struct Usage {
    std::size_t prompt_chars = 0;
    std::size_t completion_chars = 0;
};

struct CompletionRecord {
    std::string prompt_digest;
    std::string response_text;
    std::string model_id;
    Usage usage;
    std::int64_t latency_ms = 0;
};

class Backend {
public:
    virtual ~Backend() = default;
    CompletionRecord complete(const prompt::PromptBundle& bundle);
    /// Completions attempted through this backend (including failures).
    std::size_t calls() const { return calls_.load(); }
    virtual std::string model_id() const = 0;

protected:
    virtual std::string respond(const prompt::PromptBundle& bundle, const std::string& digest) = 0;

private:
    std::atomic<std::size_t> calls_{0};
};

/// Serves stored responses by prompt digest. Store layout: `<digest>.txt` per
/// response plus `index.json` = {"model_id": .., "entries": {digest: file}}.
class RecordedBackend : public Backend {
public:
    explicit RecordedBackend(const std::filesystem::path& dir);
    std::string model_id() const override { return model_id_; }
    std::size_t size() const { return entries_.size(); }
    bool contains(const std::string& digest) const { return entries_.contains(digest); }

protected:
    std::string respond(const prompt::PromptBundle& bundle, const std::string& digest) override;

private:
    std::filesystem::path dir_;
    std::string model_id_;
    std::map<std::string, std::string> entries_;
};

/// Writes responses into a store readable by RecordedBackend.
class FixtureStore {
public:
    FixtureStore(std::filesystem::path dir, std::string model_id);
    void put(const std::string& digest, const std::string& response);
    /// Rewrites index.json (sorted keys).
    void flush() const;

private:
    std::filesystem::path dir_;
    std::string model_id_;
    mutable std::mutex mu_;
    std::map<std::string, std::string> entries_;
};

/// Rule-based stand-in: renames arg<N>/v<N> in the function of the payload to
/// readable words and echoes it in a fenced block. A payload line
/// "Regeneration attempt K" rotates the word choice.
class MockBackend : public Backend {
public:
    std::string model_id() const override { return "mock-renamer"; }
    /// The rewrite itself, exposed for tests.
    static std::string rename_locals(std::string_view function_text, std::size_t attempt);

protected:
    std::string respond(const prompt::PromptBundle& bundle, const std::string& digest) override;
};

/// Chat-completions client with retries and an admission gate of
/// cfg.max_parallel concurrent requests.
class RemoteBackend : public Backend {
public:
    explicit RemoteBackend(ModelConfig cfg);
    std::string model_id() const override { return cfg_.model_id; }
    /// Highest number of requests observed in flight at once.
    std::size_t peak_in_flight() const { return peak_.load(); }

protected:
    std::string respond(const prompt::PromptBundle& bundle, const std::string& digest) override;

private:
    ModelConfig cfg_;
    std::counting_semaphore<> gate_;
    std::atomic<std::size_t> in_flight_{0};
    std::atomic<std::size_t> peak_{0};
};

/// Records every response of `inner` into `store` (used to capture fixtures
/// from a live or mock run).
class RecordingBackend : public Backend {
public:
    RecordingBackend(Backend& inner, FixtureStore& store) : inner_(inner), store_(store) {}
    std::string model_id() const override { return inner_.model_id(); }

protected:
    std::string respond(const prompt::PromptBundle& bundle, const std::string& digest) override;

private:
    Backend& inner_;
    FixtureStore& store_;
};

std::unique_ptr<Backend> make_backend(const ModelConfig& cfg);

/// Content of the first fenced code block; with several blocks, the first
/// whose first token starts a declaration. Throws ExtractionFailed.
std::string extract_code(std::string_view response_text);

inline constexpr std::string_view kReprompt =
    "Your previous reply could not be used. Output only one fenced code block containing the function.";

struct Decompilation {
    CompletionRecord record;
    std::string code;
    bool reprompted = false;
};

/// complete + extract_code; on ExtractionFailed re-prompts once with
/// kReprompt appended to the payload.
Decompilation complete_and_extract(Backend& backend, const prompt::PromptBundle& bundle);

} // namespace mad::llm

#pragma once

#include "mad/llm/client.hpp"
#include "mad/prompt/prompt.hpp"
#include "mad/service/cache.hpp"
#include "mad/service/chain.hpp"
#include "mad/verify/verifier.hpp"

#include <json.hpp>

#include <chrono>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

namespace mad::service {

enum class JobState { Queued, Fetching, Decompiling, Verifying, Complete, Failed };
std::string_view to_string(JobState s);

struct JobStatus {
    std::string job_id;
    std::string package_id;
    std::string kind; ///< "package" | "redecompile"
    JobState state = JobState::Queued;
    std::size_t done = 0;
    std::size_t total = 0;
    std::string reason; ///< failure reason
    std::string created;
    std::string updated;
    std::string model_id;
    std::string prompt_version;
    std::string arm;
    unsigned cache_version = 0; ///< version written on completion

    bool terminal() const { return state == JobState::Complete || state == JobState::Failed; }
    nlohmann::ordered_json to_json() const;
};

struct UploadedModule {
    std::string name; ///< optional; taken from the IR when empty
    std::string disassembly;
    std::string low_level;
    std::string bytecode_base64;
    std::optional<nlohmann::ordered_json> normalized;
};

struct SubmitRequest {
    std::optional<std::string> package_id;
    std::vector<UploadedModule> modules;
    std::string arm = "full";

    /// {"package_id": ..} or {"modules": [{name, disassembly | normalized,
    /// low_level, bytecode}]}, optional "arm". Throws InvalidRequest.
    static SubmitRequest from_json(const nlohmann::ordered_json& body);
};

struct ServiceConfig {
    std::filesystem::path cache_root;
    std::size_t workers = 2;
    /// Chunk fan-out inside one job.
    std::size_t max_parallel = 4;
    std::size_t max_upload_bytes = 8u << 20;
    /// Low-level decompiler for chain packages; `{}` is replaced by the
    /// bytecode file path (appended when absent). MAD_LOWLEVEL_CMD.
    std::string lowlevel_cmd;

    /// Fills lowlevel_cmd from the environment.
    void apply_env();
};

class Service {
public:
    /// `chain` may be null; chain submissions then fail with RpcError.
    Service(ServiceConfig cfg, prompt::PromptEngine engine, llm::Backend& backend, verify::Toolchain* toolchain,
            std::shared_ptr<const ChainClient> chain);
    ~Service();
    Service(const Service&) = delete;
    Service& operator=(const Service&) = delete;

    /// Throws InvalidPackageId, UploadTooLarge, InvalidRequest.
    std::string submit(const SubmitRequest& req);
    /// Throws UnknownJob.
    JobStatus job(const std::string& job_id) const;
    /// Blocks until the job is terminal or the timeout passes.
    JobStatus wait(const std::string& job_id, std::chrono::milliseconds timeout = std::chrono::seconds(30)) const;

    /// Throws PackageNotFound / ViewNotReady.
    std::vector<std::string> modules(const std::string& package_id) const;
    /// Throws UnknownView, PackageNotFound, ViewNotReady.
    std::string view(const std::string& package_id, const std::string& module, const std::string& view) const;
    nlohmann::ordered_json verification(const std::string& package_id, const std::string& module) const;
    /// Throws ViewNotReady, PackageNotFound, UnknownFunction.
    std::string redecompile(const std::string& package_id, const std::string& module, const std::string& function);

    llm::Backend& backend() { return backend_; }
    const CacheStore& cache() const { return cache_; }

private:
    struct ModuleInput;
    struct Package;
    struct Job;

    void worker_loop();
    void run_package_job(Job& job);
    void run_redecompile_job(Job& job);
    void set_state(Job& job, JobState s, std::string reason = {});
    void set_progress(Job& job, std::size_t done, std::size_t total);
    std::string new_job(const std::string& package_id, const std::string& kind, const std::string& arm);
    std::string cache_key(const std::string& package_digest, const std::string& arm) const;
    std::optional<CacheEntry> latest_entry(const std::string& package_id) const;
    std::shared_ptr<Package> package_from_upload(const SubmitRequest& req) const;
    std::shared_ptr<Package> package_from_chain(const std::string& package_id) const;

    ServiceConfig cfg_;
    prompt::PromptEngine engine_;
    llm::Backend& backend_;
    verify::Toolchain* toolchain_;
    std::shared_ptr<const ChainClient> chain_;
    CacheStore cache_;

    mutable std::mutex mu_;
    mutable std::condition_variable cv_;
    std::map<std::string, std::unique_ptr<Job>> jobs_;
    std::map<std::string, std::string> package_jobs_; ///< package id -> latest package job
    std::map<std::string, std::string> package_keys_; ///< package id -> cache key in use
    std::deque<std::string> queue_;
    bool stopping_ = false;
    std::vector<std::thread> workers_;
};

} // namespace mad::service

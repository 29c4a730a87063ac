#include "mad/service/service.hpp"

#include "mad/error.hpp"
#include "mad/ir/normalized.hpp"
#include "mad/ir/parser.hpp"
#include "mad/ir/render.hpp"
#include "mad/pipeline/pipeline.hpp"
#include "mad/util/digest.hpp"
#include "mad/util/fs.hpp"

#include <spdlog/spdlog.h>

#include <atomic>
#include <cstdlib>
#include <ctime>

namespace mad::service {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string_view to_string(JobState s)
{
    switch (s) {
    case JobState::Queued: return "queued";
    case JobState::Fetching: return "fetching";
    case JobState::Decompiling: return "decompiling";
    case JobState::Verifying: return "verifying";
    case JobState::Complete: return "complete";
    case JobState::Failed: return "failed";
    }
    return "failed";
}

json JobStatus::to_json() const
{
    json j = {{"job_id", job_id},
              {"package_id", package_id},
              {"kind", kind},
              {"state", to_string(state)},
              {"done", done},
              {"total", total},
              {"created", created},
              {"updated", updated},
              {"config", {{"model_id", model_id}, {"prompt_version", prompt_version}, {"arm", arm}}}};
    if (state == JobState::Failed)
        j["reason"] = reason;
    if (cache_version)
        j["cache_version"] = cache_version;
    return j;
}

SubmitRequest SubmitRequest::from_json(const json& body)
{
    auto bad = [](const std::string& where, const std::string& why) -> void {
        throw Error(ErrorKind::InvalidRequest, where, why);
    };
    SubmitRequest req;
    if (!body.is_object())
        bad("$", "expected a JSON object");
    if (auto it = body.find("arm"); it != body.end()) {
        if (!it->is_string())
            bad("arm", "expected a string");
        req.arm = it->get<std::string>();
        prompt::arm_config(req.arm); // validates
    }
    if (auto it = body.find("package_id"); it != body.end() && !it->is_null()) {
        if (!it->is_string())
            bad("package_id", "expected a string");
        req.package_id = it->get<std::string>();
    }
    if (auto it = body.find("modules"); it != body.end()) {
        if (!it->is_array())
            bad("modules", "expected an array");
        for (std::size_t i = 0; i < it->size(); ++i) {
            const auto& m = (*it)[i];
            const std::string where = "modules[" + std::to_string(i) + "]";
            if (!m.is_object())
                bad(where, "expected an object");
            UploadedModule u;
            auto text = [&](const char* key) {
                if (!m.contains(key) || m[key].is_null())
                    return std::string();
                if (!m[key].is_string())
                    bad(where + "." + key, "expected a string");
                return m[key].get<std::string>();
            };
            u.name = text("name");
            u.disassembly = text("disassembly");
            u.low_level = text("low_level");
            u.bytecode_base64 = text("bytecode");
            if (m.contains("normalized") && !m["normalized"].is_null())
                u.normalized = m["normalized"];
            req.modules.push_back(std::move(u));
        }
    }
    return req;
}

void ServiceConfig::apply_env()
{
    if (const char* v = std::getenv("MAD_LOWLEVEL_CMD"); v && *v)
        lowlevel_cmd = v;
}

// --- internals --------------------------------------------------------------------------

struct Service::ModuleInput {
    ir::ModuleIR ir;
    std::string disassembly;
    std::string low_level;
    std::string bytecode_base64;
};

struct Service::Package {
    std::string package_id;
    std::string digest;
    std::vector<ModuleInput> modules;
};

struct Service::Job {
    JobStatus status;
    std::shared_ptr<Package> package; ///< set at submit for uploads, after fetching for chain ids
    std::string module;
    std::string function;
};

namespace {

std::string utc_now()
{
    const auto now = std::chrono::system_clock::now();
    const std::time_t t = std::chrono::system_clock::to_time_t(now);
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[40];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%S", &tm);
    char out[48];
    std::snprintf(out, sizeof out, "%s.%03dZ", buf, static_cast<int>(ms));
    return out;
}

std::string module_digest_part(const std::string& name, const std::string& a, const std::string& b, const std::string& c)
{
    return util::Sha256().add_part(name).add_part(a).add_part(b).add_part(c).hex();
}

std::string package_digest_of(const std::vector<std::pair<std::string, std::string>>& parts)
{
    util::Sha256 h;
    for (const auto& [name, d] : parts)
        h.add_part(name).add_part(d);
    return h.hex();
}

} // namespace

Service::Service(ServiceConfig cfg, prompt::PromptEngine engine, llm::Backend& backend, verify::Toolchain* toolchain,
                 std::shared_ptr<const ChainClient> chain)
    : cfg_(std::move(cfg)),
      engine_(std::move(engine)),
      backend_(backend),
      toolchain_(toolchain),
      chain_(std::move(chain)),
      cache_(cfg_.cache_root)
{
    for (std::size_t i = 0; i < std::max<std::size_t>(1, cfg_.workers); ++i)
        workers_.emplace_back([this] { worker_loop(); });
}

Service::~Service()
{
    {
        std::lock_guard lock(mu_);
        stopping_ = true;
    }
    cv_.notify_all();
    for (auto& t : workers_)
        t.join();
}

std::string Service::cache_key(const std::string& package_digest, const std::string& arm) const
{
    return CacheStore::key(package_digest, backend_.model_id(), engine_.version(), arm);
}

std::string Service::new_job(const std::string& package_id, const std::string& kind, const std::string& arm)
{
    static std::atomic<unsigned long> counter{0};
    auto job = std::make_unique<Job>();
    auto& s = job->status;
    s.job_id = "job-" + util::Sha256().add_part(package_id).add_part(utc_now()).add_part(std::to_string(++counter)).hex().substr(0, 16);
    s.package_id = package_id;
    s.kind = kind;
    s.created = s.updated = utc_now();
    s.model_id = backend_.model_id();
    s.prompt_version = engine_.version();
    s.arm = arm;
    const auto id = s.job_id;
    jobs_[id] = std::move(job);
    return id;
}

void Service::set_state(Job& job, JobState s, std::string reason)
{
    {
        std::lock_guard lock(mu_);
        if (job.status.terminal() || static_cast<int>(s) < static_cast<int>(job.status.state))
            throw Error(ErrorKind::InvalidRequest, job.status.job_id,
                        "state may not go from " + std::string(to_string(job.status.state)) + " to " +
                            std::string(to_string(s)));
        job.status.state = s;
        job.status.reason = std::move(reason);
        if (s == JobState::Complete)
            job.status.done = job.status.total;
        job.status.updated = utc_now();
    }
    cv_.notify_all();
}

void Service::set_progress(Job& job, std::size_t done, std::size_t total)
{
    std::lock_guard lock(mu_);
    job.status.total = total;
    job.status.done = std::max(job.status.done, std::min(done, total));
    job.status.updated = utc_now();
}

std::shared_ptr<Service::Package> Service::package_from_upload(const SubmitRequest& req) const
{
    if (req.modules.empty())
        throw Error(ErrorKind::InvalidRequest, "modules", "no modules uploaded");
    std::size_t bytes = 0;
    for (const auto& m : req.modules)
        bytes += m.disassembly.size() + m.low_level.size() + m.bytecode_base64.size() + (m.normalized ? m.normalized->dump().size() : 0);
    if (bytes > cfg_.max_upload_bytes)
        throw Error(ErrorKind::UploadTooLarge, std::to_string(bytes),
                    "upload exceeds " + std::to_string(cfg_.max_upload_bytes) + " bytes");

    auto pkg = std::make_shared<Package>();
    std::vector<std::pair<std::string, std::string>> parts;
    for (std::size_t i = 0; i < req.modules.size(); ++i) {
        const auto& u = req.modules[i];
        const std::string where = "modules[" + std::to_string(i) + "]";
        if (u.low_level.empty())
            throw Error(ErrorKind::InvalidRequest, where + ".low_level", "low-level source is required");
        ModuleInput mi;
        try {
            if (!u.disassembly.empty())
                mi.ir = ir::parse_disassembly(u.disassembly);
            else if (u.normalized)
                mi.ir = ir::parse_normalized_doc(*u.normalized);
            else
                throw Error(ErrorKind::InvalidRequest, where, "needs disassembly or normalized");
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::InvalidRequest)
                throw;
            throw Error(ErrorKind::InvalidRequest, where, e.what());
        }
        if (!u.name.empty() && u.name != mi.ir.name)
            throw Error(ErrorKind::InvalidRequest, where + ".name", "name does not match module " + mi.ir.name);
        if (!u.bytecode_base64.empty()) {
            try {
                util::base64_decode(u.bytecode_base64);
            } catch (const Error& e) {
                throw Error(ErrorKind::InvalidRequest, where + ".bytecode", e.what());
            }
        }
        mi.disassembly = !u.disassembly.empty() ? u.disassembly : ir::render_stub_module(mi.ir);
        mi.low_level = u.low_level;
        mi.bytecode_base64 = u.bytecode_base64;
        parts.emplace_back(mi.ir.name, module_digest_part(mi.ir.name, mi.disassembly, mi.low_level, mi.bytecode_base64));
        pkg->modules.push_back(std::move(mi));
    }
    std::sort(parts.begin(), parts.end());
    for (std::size_t i = 1; i < parts.size(); ++i)
        if (parts[i].first == parts[i - 1].first)
            throw Error(ErrorKind::InvalidRequest, parts[i].first, "module uploaded twice");
    pkg->digest = package_digest_of(parts);
    pkg->package_id = "local-" + pkg->digest.substr(0, 16);
    return pkg;
}

std::shared_ptr<Service::Package> Service::package_from_chain(const std::string& package_id) const
{
    if (!chain_)
        throw Error(ErrorKind::RpcError, "0", "no chain RPC endpoint configured");
    const auto fetched = chain_->fetch_package(package_id);
    auto pkg = std::make_shared<Package>();
    pkg->package_id = fetched.package_id;
    std::vector<std::pair<std::string, std::string>> parts;
    for (const auto& [name, doc] : fetched.normalized) {
        ModuleInput mi;
        mi.ir = ir::parse_normalized_doc(doc);
        mi.disassembly = ir::render_stub_module(mi.ir);
        if (auto it = fetched.bytecode.find(name); it != fetched.bytecode.end())
            mi.bytecode_base64 = it->second;
        parts.emplace_back(name, util::Sha256().add_part(mi.bytecode_base64).add_part(doc.dump()).hex());
        pkg->modules.push_back(std::move(mi));
    }
    std::sort(parts.begin(), parts.end());
    pkg->digest = package_digest_of(parts);
    return pkg;
}

// --- public API -------------------------------------------------------------------------

std::string Service::submit(const SubmitRequest& req)
{
    if (req.package_id.has_value() == !req.modules.empty())
        throw Error(ErrorKind::InvalidRequest, "submit", "provide exactly one of package_id or modules");
    prompt::arm_config(req.arm);

    std::shared_ptr<Package> pkg;
    std::string package_id;
    std::optional<std::string> digest;
    if (req.package_id) {
        package_id = normalize_package_id(*req.package_id);
        digest = cache_.package_digest(package_id);
    } else {
        pkg = package_from_upload(req);
        package_id = pkg->package_id;
        digest = pkg->digest;
    }

    std::lock_guard lock(mu_);
    const auto id = new_job(package_id, "package", req.arm);
    auto& job = *jobs_[id];
    job.package = pkg;
    package_jobs_[package_id] = id;
    if (digest) {
        const auto key = cache_key(*digest, req.arm);
        if (auto versions = cache_.versions(key); !versions.empty()) {
            package_keys_[package_id] = key;
            if (pkg)
                cache_.bind_package(package_id, *digest);
            job.status.state = JobState::Complete;
            job.status.cache_version = versions.back();
            spdlog::info("job {}: cache hit for {}", id, package_id);
            cv_.notify_all();
            return id;
        }
    }
    queue_.push_back(id);
    cv_.notify_all();
    return id;
}

JobStatus Service::job(const std::string& job_id) const
{
    std::lock_guard lock(mu_);
    const auto it = jobs_.find(job_id);
    if (it == jobs_.end())
        throw Error(ErrorKind::UnknownJob, job_id, "no such job");
    return it->second->status;
}

JobStatus Service::wait(const std::string& job_id, std::chrono::milliseconds timeout) const
{
    std::unique_lock lock(mu_);
    const auto it = jobs_.find(job_id);
    if (it == jobs_.end())
        throw Error(ErrorKind::UnknownJob, job_id, "no such job");
    const Job& job = *it->second;
    cv_.wait_for(lock, timeout, [&] { return job.status.terminal(); });
    return job.status;
}

std::optional<CacheEntry> Service::latest_entry(const std::string& package_id) const
{
    std::string key;
    std::optional<std::string> pending_job;
    {
        std::lock_guard lock(mu_);
        if (auto it = package_keys_.find(package_id); it != package_keys_.end())
            key = it->second;
        if (auto it = package_jobs_.find(package_id); it != package_jobs_.end())
            pending_job = it->second;
    }
    if (key.empty()) {
        // not seen by this process: fall back to the persistent index
        if (auto digest = cache_.package_digest(package_id)) {
            for (const auto& arm : prompt::ablation_arms()) {
                const auto k = cache_key(*digest, arm.arm());
                if (cache_.contains(k)) {
                    key = k;
                    break;
                }
            }
        }
    }
    if (key.empty()) {
        if (pending_job)
            throw Error(ErrorKind::ViewNotReady, package_id, "decompilation has not finished");
        throw Error(ErrorKind::PackageNotFound, package_id, "unknown package");
    }
    return cache_.load(key);
}

std::vector<std::string> Service::modules(const std::string& package_id) const
{
    const auto entry = latest_entry(package_id);
    std::vector<std::string> out;
    for (const auto& [name, m] : entry->modules)
        out.push_back(name);
    return out;
}

std::string Service::view(const std::string& package_id, const std::string& module, const std::string& view) const
{
    if (std::find(view_names().begin(), view_names().end(), view) == view_names().end())
        throw Error(ErrorKind::UnknownView, view, "expected one of bytecode, disassembly, low_level, interface, decompiled");
    const auto entry = latest_entry(package_id);
    const auto it = entry->modules.find(module);
    if (it == entry->modules.end())
        throw Error(ErrorKind::PackageNotFound, package_id + "::" + module, "no such module in package");
    const auto& text = it->second.views.at(view);
    if (view == "bytecode" && text.empty())
        throw Error(ErrorKind::ViewNotReady, package_id + "::" + module, "no bytecode was provided for this module");
    return text;
}

json Service::verification(const std::string& package_id, const std::string& module) const
{
    const auto entry = latest_entry(package_id);
    const auto it = entry->modules.find(module);
    if (it == entry->modules.end())
        throw Error(ErrorKind::PackageNotFound, package_id + "::" + module, "no such module in package");
    return it->second.verification;
}

std::string Service::redecompile(const std::string& package_id, const std::string& module, const std::string& function)
{
    const auto entry = latest_entry(package_id);
    const auto it = entry->modules.find(module);
    if (it == entry->modules.end())
        throw Error(ErrorKind::PackageNotFound, package_id + "::" + module, "no such module in package");
    const auto ir = ir::parse_normalized_doc(it->second.ir);
    if (!ir.find_function(function))
        throw Error(ErrorKind::UnknownFunction, function, "not declared in module " + module);

    std::lock_guard lock(mu_);
    const auto id = new_job(package_id, "redecompile", entry->config.value("arm", std::string("full")));
    auto& job = *jobs_[id];
    job.module = module;
    job.function = function;
    job.status.total = 1;
    queue_.push_back(id);
    cv_.notify_all();
    return id;
}

// --- workers -------------------------------------------------------------------------------

void Service::worker_loop()
{
    for (;;) {
        Job* job = nullptr;
        {
            std::unique_lock lock(mu_);
            cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
            if (stopping_)
                return;
            job = jobs_.at(queue_.front()).get();
            queue_.pop_front();
        }
        try {
            if (job->status.kind == "redecompile")
                run_redecompile_job(*job);
            else
                run_package_job(*job);
        } catch (const std::exception& e) {
            spdlog::error("job {} failed: {}", job->status.job_id, e.what());
            try {
                set_state(*job, JobState::Failed, e.what());
            } catch (const Error&) {
            }
        }
    }
}

namespace {

std::string run_lowlevel(const std::string& cmd_template, const std::string& module, const std::string& bytecode_b64)
{
    util::TempDir dir("mad-lowlevel");
    const auto path = dir.path() / (module + ".mv");
    const auto bytes = util::base64_decode(bytecode_b64);
    util::write_file_atomic(path, std::string(bytes.begin(), bytes.end()));
    std::string cmd = cmd_template;
    const auto quoted = util::shell_quote(path.string());
    if (const auto p = cmd.find("{}"); p != std::string::npos)
        cmd.replace(p, 2, quoted);
    else
        cmd += " " + quoted;
    const auto res = util::run_command(cmd, dir.path());
    if (res.exit_code != 0)
        throw Error(ErrorKind::Io, module, "low-level decompiler failed: " + res.output);
    return res.output;
}

} // namespace

void Service::run_package_job(Job& job)
{
    const auto arm = job.status.arm;
    if (!job.package) {
        set_state(job, JobState::Fetching);
        job.package = package_from_chain(job.status.package_id);
        for (auto& m : job.package->modules) {
            if (cfg_.lowlevel_cmd.empty())
                throw Error(ErrorKind::InvalidRequest, m.ir.name,
                            "no low-level decompiler configured (set MAD_LOWLEVEL_CMD)");
            m.low_level = run_lowlevel(cfg_.lowlevel_cmd, m.ir.name, m.bytecode_base64);
        }
    }
    auto& pkg = *job.package;
    const auto key = cache_key(pkg.digest, arm);
    if (auto versions = cache_.versions(key); !versions.empty()) {
        cache_.bind_package(pkg.package_id, pkg.digest);
        {
            std::lock_guard lock(mu_);
            package_keys_[pkg.package_id] = key;
            job.status.cache_version = versions.back();
        }
        set_state(job, JobState::Complete);
        return;
    }

    set_state(job, JobState::Decompiling);
    std::vector<seg::SplitResult> splits;
    std::size_t total = 0;
    for (const auto& m : pkg.modules) {
        splits.push_back(seg::segment(m.low_level, m.ir));
        total += splits.back().chunks.size();
    }
    set_progress(job, 0, total);

    pipeline::Options opts;
    opts.prompt = engine_.config(arm);
    opts.max_parallel = cfg_.max_parallel;
    std::size_t offset = 0;
    std::vector<pipeline::ModuleResult> results;
    for (const auto& m : pkg.modules) {
        opts.on_progress = [&, offset](std::size_t done, std::size_t) { set_progress(job, offset + done, total); };
        results.push_back(pipeline::decompile_module(m.ir, m.low_level, engine_, backend_, opts));
        offset += results.back().chunks.size();
    }
    for (const auto& r : results)
        if (r.any_fixture_miss())
            throw Error(ErrorKind::FixtureMiss, pkg.package_id, "backend has no recording for some functions");

    set_state(job, JobState::Verifying);
    CacheEntry entry;
    entry.key = key;
    entry.package_id = pkg.package_id;
    entry.config = {{"model_id", backend_.model_id()}, {"prompt_version", engine_.version()}, {"arm", arm}};
    for (std::size_t i = 0; i < pkg.modules.size(); ++i) {
        const auto& m = pkg.modules[i];
        const auto& r = results[i];
        auto report = verify::verify(m.ir, m.low_level, r.decompiled, toolchain_).to_json();
        report["failed_functions"] = r.failed_functions();
        ModuleEntry me;
        me.views = {{"bytecode", m.bytecode_base64},
                    {"disassembly", m.disassembly},
                    {"low_level", m.low_level},
                    {"interface", ir::render_interface(m.ir)},
                    {"decompiled", r.decompiled}};
        me.ir = ir::to_normalized(m.ir);
        me.verification = std::move(report);
        entry.modules[m.ir.name] = std::move(me);
    }
    const auto version = cache_.write(entry);
    cache_.bind_package(pkg.package_id, pkg.digest);
    {
        std::lock_guard lock(mu_);
        package_keys_[pkg.package_id] = key;
        job.status.cache_version = version;
    }
    set_state(job, JobState::Complete);
}

void Service::run_redecompile_job(Job& job)
{
    auto entry = *latest_entry(job.status.package_id);
    auto& me = entry.modules.at(job.module);
    const auto ir = ir::parse_normalized_doc(me.ir);

    set_state(job, JobState::Decompiling);
    set_progress(job, 0, 1);
    pipeline::ModuleResult base;
    base.split = seg::segment(me.views.at("low_level"), ir);
    std::map<std::string, std::string> current;
    for (const auto& c : seg::split_functions(me.views.at("decompiled")).chunks)
        current[c.name] = c.raw_text;
    for (const auto& c : base.split.chunks) {
        pipeline::ChunkResult cr;
        cr.name = c.name;
        const auto it = current.find(c.name);
        cr.code = it != current.end() ? it->second : c.raw_text;
        base.chunks.push_back(std::move(cr));
    }
    base.decompiled = me.views.at("decompiled");

    pipeline::Options opts;
    opts.prompt = engine_.config(entry.config.value("arm", std::string("full")));
    opts.attempt = entry.version; // a fresh answer for every version
    auto res = pipeline::redecompile_function(base, ir, job.function, engine_, backend_, opts);
    set_progress(job, 1, 1);
    for (const auto& c : res.chunks)
        if (c.name == job.function && !c.ok())
            throw Error(ErrorKind::InvalidRequest, job.function, c.error);

    set_state(job, JobState::Verifying);
    auto report = verify::verify(ir, me.views.at("low_level"), res.decompiled, toolchain_).to_json();
    report["failed_functions"] = res.failed_functions();
    me.views["decompiled"] = res.decompiled;
    me.verification = std::move(report);
    const auto version = cache_.write(entry);
    {
        std::lock_guard lock(mu_);
        job.status.cache_version = version;
    }
    set_state(job, JobState::Complete);
}

} // namespace mad::service

#include "mad/service/cache.hpp"

#include "mad/error.hpp"
#include "mad/util/digest.hpp"
#include "mad/util/fs.hpp"

#include <algorithm>
#include <random>

namespace mad::service {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

bool safe_name(std::string_view s)
{
    return !s.empty() && s != "." && s != ".." &&
           std::all_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-'; });
}

std::string index_name(const std::string& package_id)
{
    // package ids are either 0x<hex> or local-<hex>; anything else is hashed
    return safe_name(package_id) ? package_id : util::Sha256().add(package_id).hex();
}

} // namespace

CacheStore::CacheStore(fs::path root) : root_(std::move(root))
{
    fs::create_directories(root_ / "packages");
}

std::string CacheStore::key(std::string_view package_digest, std::string_view model_id, std::string_view prompt_version,
                            std::string_view arm)
{
    return util::Sha256().add_part(package_digest).add_part(model_id).add_part(prompt_version).add_part(arm).hex();
}

std::vector<unsigned> CacheStore::versions(const std::string& key) const
{
    std::vector<unsigned> out;
    const fs::path dir = root_ / key;
    std::error_code ec;
    if (!safe_name(key) || !fs::is_directory(dir, ec))
        return out;
    for (const auto& e : fs::directory_iterator(dir)) {
        const auto name = e.path().filename().string();
        if (name.size() > 1 && name[0] == 'v' && std::all_of(name.begin() + 1, name.end(), ::isdigit) &&
            fs::exists(e.path() / "meta.json"))
            out.push_back(static_cast<unsigned>(std::stoul(name.substr(1))));
    }
    std::sort(out.begin(), out.end());
    return out;
}

bool CacheStore::contains(const std::string& key) const { return !versions(key).empty(); }

std::optional<CacheEntry> CacheStore::load(const std::string& key, std::optional<unsigned> version) const
{
    const auto vs = versions(key);
    if (vs.empty())
        return std::nullopt;
    const unsigned v = version.value_or(vs.back());
    if (!std::binary_search(vs.begin(), vs.end(), v))
        return std::nullopt;
    const fs::path dir = root_ / key / ("v" + std::to_string(v));
    CacheEntry e;
    e.key = key;
    e.version = v;
    try {
        const auto meta = json::parse(util::read_file(dir / "meta.json"));
        e.package_id = meta.at("package_id").get<std::string>();
        e.config = meta.at("config");
        for (const auto& m : meta.at("modules")) {
            const auto name = m.get<std::string>();
            ModuleEntry me;
            for (const auto& view : view_names())
                me.views[view] = util::read_file(dir / name / (view + ".txt"));
            me.ir = json::parse(util::read_file(dir / name / "ir.json"));
            me.verification = json::parse(util::read_file(dir / name / "verification.json"));
            e.modules[name] = std::move(me);
        }
    } catch (const json::exception& ex) {
        throw Error(ErrorKind::Io, dir.string(), std::string("corrupt cache entry: ") + ex.what());
    }
    return e;
}

unsigned CacheStore::write(const CacheEntry& entry)
{
    if (!safe_name(entry.key))
        throw Error(ErrorKind::Io, entry.key, "invalid cache key");
    std::lock_guard lock(mu_);
    const auto vs = versions(entry.key);
    const unsigned v = vs.empty() ? 1 : vs.back() + 1;
    const fs::path base = root_ / entry.key;
    fs::create_directories(base);

    std::mt19937_64 rng(std::random_device{}());
    const fs::path tmp = base / (".tmp-" + std::to_string(rng()));
    json modules = json::array();
    for (const auto& [name, m] : entry.modules) {
        if (!safe_name(name))
            throw Error(ErrorKind::Io, name, "invalid module name");
        modules.push_back(name);
        for (const auto& [view, text] : m.views)
            util::write_file_atomic(tmp / name / (view + ".txt"), text);
        util::write_file_atomic(tmp / name / "ir.json", m.ir.dump(2) + "\n");
        util::write_file_atomic(tmp / name / "verification.json", m.verification.dump(2) + "\n");
    }
    const json meta = {{"key", entry.key}, {"version", v}, {"package_id", entry.package_id}, {"config", entry.config},
                       {"modules", modules}};
    util::write_file_atomic(tmp / "meta.json", meta.dump(2) + "\n");
    fs::rename(tmp, base / ("v" + std::to_string(v)));
    return v;
}

void CacheStore::bind_package(const std::string& package_id, const std::string& package_digest)
{
    util::write_file_atomic(root_ / "packages" / (index_name(package_id) + ".json"),
                            json{{"package_id", package_id}, {"digest", package_digest}}.dump(2) + "\n");
}

std::optional<std::string> CacheStore::package_digest(const std::string& package_id) const
{
    const fs::path p = root_ / "packages" / (index_name(package_id) + ".json");
    std::error_code ec;
    if (!fs::exists(p, ec))
        return std::nullopt;
    return json::parse(util::read_file(p)).at("digest").get<std::string>();
}

} // namespace mad::service

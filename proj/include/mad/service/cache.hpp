#pragma once

#include <json.hpp>

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

namespace mad::service {

inline const std::vector<std::string>& view_names()
{
    static const std::vector<std::string> v{"bytecode", "disassembly", "low_level", "interface", "decompiled"};
    return v;
}

struct ModuleEntry {
    std::map<std::string, std::string> views; ///< the five views
    nlohmann::ordered_json ir;                ///< normalized document of the module IR
    nlohmann::ordered_json verification;
};

struct CacheEntry {
    std::string key;
    unsigned version = 0; ///< assigned by write
    std::string package_id;
    nlohmann::ordered_json config; ///< model_id, prompt_version, arm
    std::map<std::string, ModuleEntry> modules;
};

/// Content-addressed store: `<root>/<key>/v<N>/` holding meta.json and one
/// directory per module. Versions are immutable; a new version is written
/// into a temp directory and renamed into place.
class CacheStore {
public:
    explicit CacheStore(std::filesystem::path root);

    static std::string key(std::string_view package_digest, std::string_view model_id, std::string_view prompt_version,
                           std::string_view arm);

    bool contains(const std::string& key) const;
    /// Latest version, or a specific one.
    std::optional<CacheEntry> load(const std::string& key, std::optional<unsigned> version = std::nullopt) const;
    std::vector<unsigned> versions(const std::string& key) const;
    /// Writes `entry` as the next version of entry.key and returns it.
    unsigned write(const CacheEntry& entry);

    /// Package id -> content digest, persisted under `<root>/packages/`.
    void bind_package(const std::string& package_id, const std::string& package_digest);
    std::optional<std::string> package_digest(const std::string& package_id) const;

    const std::filesystem::path& root() const { return root_; }

private:
    std::filesystem::path root_;
    mutable std::mutex mu_;
};

} // namespace mad::service

#pragma once

#include "mad/util/fs.hpp"

#include <algorithm>
#include <filesystem>
#include <string>
#include <vector>

#ifndef MAD_FIXTURE_DIR
#error "MAD_FIXTURE_DIR must be defined by the build"
#endif

namespace mad::test {

inline std::filesystem::path fixture_dir() { return MAD_FIXTURE_DIR; }
inline std::filesystem::path corpus_dir() { return fixture_dir() / "corpus"; }

inline std::string corpus_file(const std::string& stem, const std::string& ext)
{
    return util::read_file(corpus_dir() / (stem + ext));
}

/// Stems ("01_counter", ...) of corpus modules having a file with `ext`.
inline std::vector<std::string> corpus_stems(const std::string& ext = ".move")
{
    std::vector<std::string> out;
    for (const auto& e : std::filesystem::directory_iterator(corpus_dir()))
        if (e.path().extension() == ext)
            out.push_back(e.path().stem().string());
    std::sort(out.begin(), out.end());
    return out;
}

} // namespace mad::test

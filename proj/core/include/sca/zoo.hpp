#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "sca/arch.hpp"

namespace sca::zoo {

/// Zoo directory resolution order: explicit argument, SCA_ZOO_DIR
/// environment variable, compiled-in default (the source tree data dir).
std::filesystem::path default_dir();

struct Entry {
    std::string name;
    std::string variant;
    std::filesystem::path path;
};

/// Scans a zoo directory; entries are sorted by (name, variant).
std::vector<Entry> list_entries(const std::filesystem::path& dir = default_dir());

/// Loads and validates one architecture. Unknown (name, variant) pairs
/// raise an IoError listing the valid entries.
arch::ArchitectureSpec build(const std::string& name, const std::string& variant,
                             const std::filesystem::path& dir = default_dir());

arch::ArchitectureSpec load_file(const std::filesystem::path& path);

}  // namespace sca::zoo

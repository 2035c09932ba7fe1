#include "sca/zoo.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#ifndef SCA_DEFAULT_ZOO_DIR
#define SCA_DEFAULT_ZOO_DIR ""
#endif

namespace sca::zoo {

namespace fs = std::filesystem;

fs::path default_dir() {
    if (const char* env = std::getenv("SCA_ZOO_DIR"); env && *env) return fs::path(env);
    return fs::path(SCA_DEFAULT_ZOO_DIR);
}

arch::ArchitectureSpec load_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open zoo file: " + path.string());
    nlohmann::json doc;
    try {
        in >> doc;
    } catch (const nlohmann::json::exception& e) {
        throw IoError("corrupt zoo file " + path.string() + ": " + e.what());
    }
    return arch::arch_from_json(doc);
}

std::vector<Entry> list_entries(const fs::path& dir) {
    if (!fs::is_directory(dir))
        throw IoError("zoo directory not found: " + dir.string());
    std::vector<Entry> entries;
    for (const auto& item : fs::directory_iterator(dir)) {
        if (item.path().extension() != ".json") continue;
        auto spec = load_file(item.path());
        entries.push_back(Entry{spec.name, spec.variant, item.path()});
    }
    if (entries.empty()) throw IoError("zoo directory is empty: " + dir.string());
    std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) {
        return std::tie(a.name, a.variant) < std::tie(b.name, b.variant);
    });
    return entries;
}

arch::ArchitectureSpec build(const std::string& name, const std::string& variant,
                             const fs::path& dir) {
    auto entries = list_entries(dir);
    for (const auto& e : entries) {
        if (e.name == name && e.variant == variant) {
            auto spec = load_file(e.path);
            arch::throw_if_invalid(spec);
            return spec;
        }
    }
    std::ostringstream msg;
    msg << "unknown zoo entry " << name << "/" << variant << "; valid entries:";
    for (const auto& e : entries) msg << " " << e.name << "/" << e.variant;
    throw IoError(msg.str());
}

}  // namespace sca::zoo

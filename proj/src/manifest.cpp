#include "trendgnn/manifest.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>

#include <json.hpp>

#include "trendgnn/csvio.hpp"

namespace trendgnn::manifest {

std::string digest_bytes(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string digest_file(const std::string& path) {
    return digest_bytes(csvio::read_text_file(path));
}

void RunManifest::add_input(const std::string& path) {
    inputs.emplace_back(path, digest_file(path));
}

void RunManifest::write(const std::string& dir) const {
    nlohmann::json j;
    j["tool"] = "trendgnn";
    j["version"] = kToolVersion;
    j["command"] = command;
    j["config_digest"] = digest_bytes(config_text);
    j["config"] = config_text;
    j["seeds"] = seeds;
    j["inputs"] = nlohmann::json::array();
    for (const auto& [path, digest] : inputs) {
        j["inputs"].push_back({{"path", path}, {"digest", digest}});
    }
    j["outputs"] = outputs;
    const auto now = std::chrono::system_clock::now().time_since_epoch();
    j["written_unix_ms"] =
        std::chrono::duration_cast<std::chrono::milliseconds>(now).count();
    csvio::write_text_file((std::filesystem::path(dir) / "manifest.json").string(),
                           j.dump(2) + "\n");
}

std::string resolve_out_dir(const std::string& override_dir, const std::string& command,
                            const std::string& config_text) {
    std::string dir = override_dir;
    if (dir.empty()) {
        dir = "runs/" + command + "-" + digest_bytes(config_text).substr(0, 8);
    }
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace trendgnn::manifest

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace trendgnn::manifest {

inline constexpr const char* kToolVersion = "0.1.0";

/// FNV-1a 64 over raw bytes, rendered as 16 hex digits. Verifies that a
/// rerun consumed the same inputs; not a cryptographic guarantee.
std::string digest_bytes(const std::string& bytes);
std::string digest_file(const std::string& path);

/// Record of one CLI run: config snapshot, seeds, input digests and the
/// artifacts produced. Written as manifest.json next to the outputs.
struct RunManifest {
    std::string command;
    std::string config_text;
    std::vector<std::uint64_t> seeds;
    std::vector<std::pair<std::string, std::string>> inputs;  // path, digest
    std::vector<std::string> outputs;

    void add_input(const std::string& path);
    void write(const std::string& dir) const;
};

/// Output directory for a command: the explicit override when given, else a
/// content-named `runs/<command>-<config digest prefix>` so different
/// configs never silently overwrite each other.
std::string resolve_out_dir(const std::string& override_dir, const std::string& command,
                            const std::string& config_text);

}  // namespace trendgnn::manifest

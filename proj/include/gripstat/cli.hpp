#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace gripstat::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitUsage = 2;

// gripstat <simulate|generate|train|eval|forces|sweep> [flags]
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int main(int argc, char** argv);

// Re-runs the command recorded in <dir>/manifest.json with its output sent to
// new_out, then compares output checksums. Returns true when every recorded
// output is reproduced byte for byte; mismatches are described in *report.
bool replay_manifest(const std::filesystem::path& manifest, const std::filesystem::path& new_out,
                     std::string* report = nullptr);

}  // namespace gripstat::cli

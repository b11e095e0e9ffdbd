#pragma once

#include <filesystem>
#include <iosfwd>
#include <nlohmann/json.hpp>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace depkit::cli {

inline constexpr std::string_view kVerbs[] = {"ingest",   "baseline", "finetune", "fuse",
                                              "transfer", "evaluate", "report",   "gridsearch"};

struct CommandInvocation {
  std::string verb;
  std::filesystem::path config_path;
  std::vector<std::string> overrides;  // key=value, dotted keys, applied in order
  std::optional<std::vector<int>> seeds;
  std::filesystem::path out = "runs";
  bool paper_faithful = false;
  bool toy = false;
  std::vector<std::filesystem::path> positional;  // run directories for evaluate/report
  // Defaults to DEPKIT_CACHE, then .depkit-cache.
  std::optional<std::filesystem::path> cache_root;
  bool quiet = false;
};

// Exit codes by error category.
inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitData = 3;
inline constexpr int kExitTrain = 4;
inline constexpr int kExitMissingArtifact = 5;

// Sets `path` (dots separate object keys) to `value`, parsed as JSON when it
// parses and kept as a string otherwise.
void apply_override(nlohmann::json& config, std::string_view assignment);

std::vector<int> parse_seed_list(std::string_view s);

// Runs one verb. Progress goes to `out`, diagnostics to `err`. Never throws.
int dispatch(const CommandInvocation& inv, std::ostream& out, std::ostream& err);

// Directory created by the most recent successful dispatch in this process.
const std::filesystem::path& last_run_dir();

}  // namespace depkit::cli

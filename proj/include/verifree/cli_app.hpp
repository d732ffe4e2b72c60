#pragma once

#include <optional>
#include <string>
#include <vector>

namespace verifree {

/// Parsed command line for the experiment runner.
struct CliRequest {
  std::string subcommand;  // check | variance | train | compare | patch-demo
  std::optional<std::string> config_path;
  std::vector<std::string> overrides;  // repeated --set section.key=value
  std::string out_dir = ".";
  int workers = 0;  // 0 = machine cores
  std::optional<std::uint64_t> seed;  // overrides trainer.seed
};

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidationFailure = 1;
inline constexpr int kExitNumericalCheckFailure = 2;

/// Runs one subcommand; returns the process exit code. All error paths name
/// the offending config key or check.
int run_cli(const CliRequest& request);

}  // namespace verifree

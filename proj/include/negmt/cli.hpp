#pragma once

// The `negmt` command-line front end.

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace negmt {

/// Default output directory when --out-dir is not given.
inline constexpr const char* kOutDirEnv = "NEGMT_OUT_DIR";

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitValidation = 2, kExitIo = 3 };

/// Options shared by every subcommand.
struct RunConfig {
  /// Space-joined subcommand path, e.g. "contrastive score".
  std::string command;
  std::vector<std::string> arguments;
  std::string out_dir = ".";
  /// Output basename; defaults to the command with '_' for spaces.
  std::string name;
  bool write_csv = true;
  bool write_json = true;
  bool charts = false;
  std::size_t jobs = 1;
  std::uint64_t seed = 1;
  bool quiet = false;
};

/// Runs one invocation. `args` excludes the program name. Never throws;
/// errors are printed to `err` and mapped to an ExitCode.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace negmt

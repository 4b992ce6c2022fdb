#ifndef EMBNLI_CLI_HPP
#define EMBNLI_CLI_HPP

#include <cstdint>
#include <exception>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

namespace embnli {

inline constexpr const char* kVersion = "0.1.0";

/// Written before any computation; rerunning `argv` with the same inputs
/// reproduces the outputs (single-threaded).
struct RunManifest {
  std::string subcommand;
  std::vector<std::string> argv;
  std::map<std::string, std::string> config;         ///< every option of the subcommand, resolved
  std::map<std::string, std::string> input_sha256;   ///< resolved input path -> digest
  std::uint64_t seed = 0;
  std::string version = kVersion;

  [[nodiscard]] std::string to_json() const;
  static RunManifest from_json(const std::string& text);
};

/// 0 success, 1 usage, 2 data, 3 numerical.
int exit_code_for(const std::exception& e);

/// Parses and runs one subcommand. Flags override `--config` file values,
/// which override defaults.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace embnli

#endif  // EMBNLI_CLI_HPP

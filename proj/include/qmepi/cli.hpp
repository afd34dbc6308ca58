#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace qmepi {

enum class Command { SolveMe, SolveMepi, Classify, Verify, Oracle, Geometry };
enum class Format { Json, Csv };

/// Exit codes of the command-line front end.
enum ExitCode : int {
  kExitOk = 0,
  kExitVerifyFailed = 1,
  kExitValidation = 2,
  kExitConvergence = 3,
  kExitConsistency = 4,
};

struct RunConfig {
  Command command = Command::SolveMe;
  std::string input_path;
  std::optional<std::string> output_path;
  std::optional<double> tol_class;
  std::optional<double> tol_value;
  std::optional<std::uint64_t> seed;
  Format format = Format::Json;
  bool uncertified = false;
};

/// Parses "solve-me", "solve-mepi", ... Throws ValidationError.
Command command_from_string(const std::string& s);
Format format_from_string(const std::string& s);

/// Runs one command. Results go to the output file, or `out` when none is
/// set; diagnostics go to `err`. Returns one of ExitCode.
int run(const RunConfig& config, std::ostream& out, std::ostream& err);

}  // namespace qmepi

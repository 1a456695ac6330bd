#pragma once

#include "convsync/config.hpp"
#include "convsync/steady_state.hpp"

#include <iosfwd>
#include <optional>
#include <string>

namespace convsync {

enum ExitCode : int { kExitOk = 0, kExitConfig = 2, kExitAssumption = 3, kExitNumerical = 4 };

/// Steady state of a run: angles from the config when given, otherwise the
/// Newton inversion of the configured (or i_dc*) inputs.
SteadyState resolve_steady_state(const RunConfig& cfg);

/// Executes the configured scenario, writes its artifacts into
/// cfg.output_dir and returns an exit code. Errors are reported on `err`.
int run(const RunConfig& cfg, std::ostream& log, std::ostream& err);

/// Command-line entry point:
///   convsync <scenario> --config <path> [--out <dir>] [--seed <u64>] [--t-end <s>]
int cli_main(int argc, char** argv);

}  // namespace convsync

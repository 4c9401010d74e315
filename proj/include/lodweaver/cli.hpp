#pragma once

#include <iosfwd>

namespace lodweaver {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitInvalid = 2,
  kExitFailure = 3,
};

// Subcommands: validate, ingest, reconcile, index, serve, export-linkset,
// fixture-endpoint. Diagnostics go to `err`; --help text to `out`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run_cli(int argc, const char* const* argv);

}  // namespace lodweaver

#pragma once

#include <iosfwd>

namespace gapscore {

// Entry point behind the gapscore binary. Returns the process exit code:
// 0 on success, 2 on usage or configuration errors, 1 on runtime failures.
// Failures are reported as one line on `err`:
//   error: <kind>: <message>
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace gapscore

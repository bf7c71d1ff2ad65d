#pragma once

// The `latcompass` command line:
//
//   serve              run the HTTP service (flags mirror ServiceConfig,
//                      environment overrides LATCOMPASS_<FLAG>)
//   serve-generator    expose a generator over the external wire protocol
//   eval               run a recovery experiment and write a metrics file
//   moderate <id> <status>
//   export-direction <id> <file>
//   import-direction <file>
//
// Exit codes: 0 success, 1 runtime error, 2 usage error.

#include <iosfwd>
#include <string>
#include <vector>

namespace latcompass {

// args excludes the program name.
int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace latcompass

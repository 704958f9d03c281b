#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace prefcore::cli {

// Runs the command line `args` (args[0] is the program name). Normal output
// goes to `out`, diagnostics to `err`. Returns the process exit code:
// 0 success, 1 usage error, 2 data or format error, 3 numerical failure.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace prefcore::cli

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace aigt {

// Runs the command line `args` (args[0] is the program name). JSON or CSV
// results go to `out`, usage text and diagnostics to `err`.
// Exit codes: 0 success, 1 usage or contract error, 2 I/O error.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace aigt

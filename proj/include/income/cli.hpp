#pragma once

// Command-line frontend.  Every command writes its tables into --out-dir along
// with manifest.json, which records the command, the seed and every resolved
// option.  `replay <manifest>` re-runs it and must reproduce the outputs byte
// for byte.

#include <iosfwd>
#include <string>
#include <vector>

namespace income {

/// Run the CLI with argv-style arguments (args[0] is the program name).
/// Returns the process exit code: 0 success, 2 usage, 3 data validation,
/// 4 numerical failure, 1 anything else.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace income

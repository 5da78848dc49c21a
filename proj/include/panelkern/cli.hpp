#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace panelkern {

// Command-line front end with subcommands simulate, estimate, study, analyze
// and kernel-info.  Exit codes: 0 success, 1 usage error, 2 input or config
// validation error, 3 estimation failure.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace panelkern

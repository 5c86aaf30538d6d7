#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace contrastner {

// Entry point behind the `contrastner` binary. args[0] is the program name.
// Returns 0 on success, 1 for user/input errors, 2 for internal failures.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace contrastner

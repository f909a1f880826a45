#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace unipoint {

/// Runs the command line; args exclude the program name. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace unipoint

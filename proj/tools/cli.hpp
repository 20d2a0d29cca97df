#ifndef NKF_TOOLS_CLI_HPP
#define NKF_TOOLS_CLI_HPP

#include <ostream>
#include <string>
#include <vector>

namespace nkf::cli {

/// Runs the nkf command line on `args` (without the program name). Returns
/// the process exit code: 0 on success, 2 for bad input, 1 otherwise.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace nkf::cli

#endif

#ifndef OVERREC_CLI_HPP
#define OVERREC_CLI_HPP

#include <iosfwd>
#include <string>
#include <vector>

namespace overrec {

enum ExitCode : int {
    kExitOk = 0,
    kExitInput = 2,
    kExitCapacity = 3,
    kExitConsistency = 4,
    kExitVerification = 5,
};

/// Runs `overrec <subcommand> ...`. args[0] is the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace overrec

#endif  // OVERREC_CLI_HPP

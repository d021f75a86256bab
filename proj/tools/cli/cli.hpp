#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace wmadv::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 1;
inline constexpr int kExitRuntime = 2;

// Runs the `wmadv` command line. args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

inline const std::vector<std::string> kSubcommands{"embed",   "select-hosts", "rank-watermarks", "attack",
                                                   "combined", "features",     "report",          "oracle-builtin"};

// Long flag names (without dashes) registered for a subcommand, excluding
// --help. This is the registry the run manifest is checked against.
std::vector<std::string> registered_flags(const std::string& subcommand);

}  // namespace wmadv::cli

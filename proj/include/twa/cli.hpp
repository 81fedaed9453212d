#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace twa {

/// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2, kExitNumerical = 3 };

/// Runs one subcommand (gen, ingest, align, pairs, train, eval, rank-diff,
/// stats, ablate). `args[0]` is the program name. Files written by a failing
/// subcommand are removed before returning.
int run_subcommand(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace twa

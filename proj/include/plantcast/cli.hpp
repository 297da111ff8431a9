#pragma once

#include <iostream>
#include <ostream>

namespace plantcast::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kDataError = 2, kInternal = 3 };

// Environment variable overriding `paths.workdir`.
inline constexpr const char* kWorkdirEnv = "PLANTCAST_WORKDIR";

// Subcommands: synth, prepare, featurize, train, evaluate, predict, report.
int cli_main(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr);

} // namespace plantcast::cli

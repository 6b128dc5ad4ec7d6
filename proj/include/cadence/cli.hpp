#pragma once

// Command-line front end: ingest, build, train, eval, predict and synth.
// Kept in a library so tests can drive it in-process.

#include <iosfwd>
#include <string>
#include <vector>

namespace cadence::cli {

enum ExitCode : int { kOk = 0, kUsage = 1, kData = 2, kNumeric = 3 };

/// Runs one command. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Worker threads: hardware concurrency capped by SGSM_THREADS when set.
unsigned worker_threads();

}  // namespace cadence::cli

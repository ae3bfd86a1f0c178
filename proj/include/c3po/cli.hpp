// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <iostream>

namespace c3po {

/// Exit codes shared by every subcommand.
enum ExitCode : int { kExitOk = 0, kExitRuntime = 1, kExitUsage = 2 };

/// Entry point of the `c3po` tool: synth, train, eval, predict, branches and
/// ablate. Returns the process exit code.
int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout,
            std::ostream& err = std::cerr);

}  // namespace c3po

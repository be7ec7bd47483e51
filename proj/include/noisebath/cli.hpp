#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace noisebath {

enum ExitCode { kExitOk = 0, kExitConfig = 2, kExitInvariant = 3, kExitConvergence = 4 };

// Entry point shared by the executable and the tests. args excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace noisebath

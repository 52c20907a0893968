#pragma once

#include <string>
#include <vector>

namespace freenoise::cli {

/// Entry point behind the `freenoise` binary; exposed so tests can drive the
/// CLI in-process. args excludes the program name. Returns the process exit
/// code: 0 ok, 1 runtime error, 2 configuration error.
int run(const std::vector<std::string>& args);

int run(int argc, const char* const* argv);

}  // namespace freenoise::cli

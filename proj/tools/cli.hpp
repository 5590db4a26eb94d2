#pragma once

#include <string>
#include <vector>

namespace dmarch::cli {

// Exit codes: 0 success, 1 failed verify checks, 2 bad config or arguments,
// 3 numeric failure.
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

}  // namespace dmarch::cli

#pragma once

#include <string>
#include <vector>

namespace dyad::cli {

// Entry point shared by the binary and the in-process tests.
// Exit status: 0 success, 1 validation/usage error, 2 runtime failure.
int dispatch(const std::vector<std::string>& args);

}  // namespace dyad::cli

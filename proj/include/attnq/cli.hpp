#pragma once

#include <string>
#include <vector>

namespace attnq::cli {

// Exit codes: 0 success, 1 usage error, 2 validation/data error,
// 3 numerical failure (factorization failed after damping).
int run(int argc, const char* const* argv);
int run(const std::vector<std::string>& args);

} // namespace attnq::cli

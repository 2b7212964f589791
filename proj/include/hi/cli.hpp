#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace hi::cli {

inline constexpr const char* kToolVersion = "1.0.0";
// Environment variable naming the default registry file.
inline constexpr const char* kRegistryEnv = "HI_REGISTRY";

// Runs one command line (without the program name). Reports go to out as JSON, diagnostics to err.
// Exit codes: 0 all checks pass, 1 a mathematical check failed, 2 usage or input error.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace hi::cli

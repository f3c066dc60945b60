#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cpmmd {

inline constexpr const char* kToolVersion = "0.1.0";

/// Exit codes: 0 completed, 2 configuration or input error, 3 numerical
/// abort, 1 anything else.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);
int run_cli(int argc, char** argv);

}  // namespace cpmmd

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace eicl::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitDomainError = 1;
inline constexpr int kExitUsageError = 2;

// args[0] is the program name. Normal output goes to `out`; diagnostics and
// usage synopses go to `err`.
int execute(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace eicl::cli

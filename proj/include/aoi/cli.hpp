#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace aoi::cli {

// Process exit codes.
inline constexpr int kOk = 0;
inline constexpr int kUsageError = 2;        // bad flags or configuration
inline constexpr int kDomainError = 3;       // e.g. Laplace argument outside the convergence region
inline constexpr int kReplicationError = 4;  // a simulation replication failed
inline constexpr int kCheckFailed = 5;       // validate found a failing check

// Runs `aoi <args...>`; args excludes the program name. Reports go to the
// configured output path (written atomically) or to `out`; diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace aoi::cli

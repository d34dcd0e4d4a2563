#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace admissible::cli {

/// Seed used when --seed is omitted, so unseeded runs still reproduce.
inline constexpr std::uint64_t kDefaultSeed = 20231;

/// Runs the audit command line. `args` excludes the program name.
/// Returns 0 on success, 1 on usage errors, 2 on data errors.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace admissible::cli

#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace toytts {

/// Runs one `toytts` subcommand. `args` excludes the program name. Returns
/// the process exit code: 0 on success, 1 on a runtime failure (including a
/// failed gradient check), 2 on a usage error.
int run_command(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Reads a rectangular numeric CSV (no header).
std::vector<std::vector<double>> read_csv_matrix(const std::string& path);

}  // namespace toytts

#pragma once

#include <string>
#include <vector>

namespace relkal {

/// Entry point of the `relkal` tool. Returns 0 on success, 2 on configuration or
/// argument errors and 1 on runtime failures.
int run_command(int argc, char** argv);

/// Same as above with the arguments after the program name.
int run_command(const std::vector<std::string>& args);

/// Numeric formatting used in every emitted CSV: 12 significant digits, '.' decimal
/// point, no grouping.
std::string format_number(double value);

}  // namespace relkal

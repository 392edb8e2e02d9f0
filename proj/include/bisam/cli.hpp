#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bisam {

/// Entry point of the `bisam` tool. `args` excludes the program name.
/// Returns 0 on success, 2 for invalid input or configuration and 1 for
/// runtime failures; failures write one `error: {json}` line to `err`.
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace bisam

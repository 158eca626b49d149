#pragma once

#include <string>
#include <vector>

namespace fedtrack {

/// Exit codes: 0 success, 1 runtime failure, 2 usage error, 3 verification
/// failure.
int cli_main(const std::vector<std::string>& args);

} // namespace fedtrack

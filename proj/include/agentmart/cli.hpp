#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace agentmart {

// Exit codes: 0 success, 1 validation or usage error, 2 runtime failure.
int cli(int argc, const char* const* argv);
int cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace agentmart

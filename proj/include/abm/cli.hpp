#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace abm {

// Exit codes: 0 success, 1 contract violation or undefined metric, 2 usage.
int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace abm

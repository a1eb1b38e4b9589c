#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace wsrl::cli {

// Exit codes: 0 success, 1 runtime failure, 2 bad flags or config.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace wsrl::cli

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gridmpc {

// Entry point behind the gridmpc executable. Exit status: 0 on success,
// 1 when a run fails, 2 for usage and configuration errors.
int main_dispatch(int argc, const char* const* argv);
int main_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

// "2..10", "3,5,8" or "7".
std::vector<std::size_t> parse_horizon_list(const std::string& text);

}  // namespace gridmpc

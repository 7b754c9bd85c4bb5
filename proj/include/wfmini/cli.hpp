#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "wfmini/error.hpp"

namespace wfmini {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUser = 1;
inline constexpr int kExitRuntime = 2;

/// 1 for bad input (schemas, selectors, preconditions), 2 for failures while
/// running or validating.
int exit_code_for(ErrorCode code) noexcept;

/// Entry point of the wfmini tool. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace wfmini

#pragma once

#include <iosfwd>

namespace llmref {

// Exit codes: 0 success, 1 domain error, 2 usage error. Results go to
// `out`, diagnostics to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace llmref

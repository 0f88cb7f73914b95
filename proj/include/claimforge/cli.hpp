#pragma once

#include <iosfwd>

namespace claimforge {

// Entry point of the claimforge binary. Returns the process exit status:
// 0 on success, 2 on usage errors, 1 on input, backend or stage failures.
// Failures print one JSON line to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace claimforge

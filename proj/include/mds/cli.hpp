#pragma once

#include <iosfwd>

namespace mds {

/// Entry point for the `mds` tool. Returns 0 on success, 1 on input errors
/// (including usage errors) and 2 on internal errors. Data goes to `out` or
/// the --out file; diagnostics go to `err`.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mds

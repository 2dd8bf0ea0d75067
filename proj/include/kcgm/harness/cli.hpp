#pragma once

#include <iosfwd>

namespace kcgm::harness {

/// Entry point of the `kcgm` command line tool. Returns 0 on success, 2 on a
/// usage or configuration error and 1 when the computation itself fails.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace kcgm::harness

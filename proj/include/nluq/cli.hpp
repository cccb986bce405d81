#pragma once

#include <iosfwd>
#include <string>

namespace nluq {

// Version string embedded in every output file.
std::string version_string();

// Entry point of the nluq tool. Returns 0 on success, 2 for bad arguments
// or configuration, 3 for numerical failures. Nothing is written to the
// output directory unless the subcommand completes.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace nluq

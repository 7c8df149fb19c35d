// Subcommand entry point for the whole pipeline.
//
// Exit codes: 0 success, 1 usage error, 2 data error. Every stage prints one JSON
// summary line on `out`; warnings go to `err`. `--config <file.json>` supplies option
// values ({"seed": 1, "pretrain": {"steps": 200}}); command-line flags take precedence.
#pragma once

#include <iosfwd>

namespace ltx::cli {

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(int argc, const char* const* argv);

}  // namespace ltx::cli

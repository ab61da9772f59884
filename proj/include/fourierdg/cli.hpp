#pragma once

#include <iosfwd>
#include <span>
#include <string>

namespace fourierdg::cli {

enum ExitCode : int {
  kOk = 0,
  kValidation = 1,
  kRuntime = 2,
};

// Entry point for `fourierdg <subcommand> [flags]`. args excludes argv[0].
int run(std::span<const std::string> args, std::ostream& out, std::ostream& err);

}  // namespace fourierdg::cli

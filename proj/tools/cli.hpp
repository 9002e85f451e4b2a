#ifndef TWPA_CLI_HPP
#define TWPA_CLI_HPP

namespace twpa::cli {

/// Parse arguments and run one subcommand. Exit codes: 0 success,
/// 1 configuration error, 2 numerical failure, 3 IO failure.
int run_cli(int argc, const char* const* argv);

}  // namespace twpa::cli

#endif

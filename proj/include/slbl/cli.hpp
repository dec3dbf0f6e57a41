// SPDX-License-Identifier: Apache-2.0
/**
 * @file   cli.hpp
 * @brief  Entry point of the `slbl` command-line tool.
 */
#ifndef SLBL_CLI_HPP_
#define SLBL_CLI_HPP_

#include <iosfwd>
#include <string>
#include <vector>

namespace slbl::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitData = 2;

/// args excludes the program name. JSON reports go to `out`; usage text,
/// diagnostics and human-readable tables go to `err`.
int run(const std::vector<std::string> &args, std::ostream &out,
        std::ostream &err);

int run(int argc, char **argv);

} // namespace slbl::cli

#endif // SLBL_CLI_HPP_

// SPDX-License-Identifier: Apache-2.0
/**
 * @file   slbl_main.cpp
 * @brief  `slbl` executable.
 */
#include <slbl/cli.hpp>

int main(int argc, char **argv) { return slbl::cli::run(argc, argv); }

// Copyright (c) 2026 The dtdenoise Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <string>
#include <vector>

#include "dtdenoise/cli_main.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return dtd::cli_main(args, std::cout, std::cerr);
}

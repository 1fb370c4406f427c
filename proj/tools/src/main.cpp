// Copyright 2026 The ScoreFusion Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "scorefusion/cli.hpp"

int main(int argc, char** argv) {
    return scorefusion::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}

// SPDX-License-Identifier: Apache-2.0
#include "c3po/cli.hpp"

int main(int argc, char** argv) { return c3po::run_cli(argc, argv); }

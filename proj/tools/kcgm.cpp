#include <iostream>

#include "kcgm/harness/cli.hpp"

int main(int argc, char** argv) { return kcgm::harness::run_cli(argc, argv, std::cout, std::cerr); }

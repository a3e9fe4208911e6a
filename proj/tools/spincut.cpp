#include <iostream>

#include "spincut/harness/cli.hpp"

int main(int argc, char** argv) { return spincut::harness::cli_main(argc, argv, std::cout, std::cerr); }

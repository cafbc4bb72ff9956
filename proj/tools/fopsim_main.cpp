#include <iostream>

#include "fopsim/cli.hpp"

int main(int argc, char** argv) { return fopsim::run_cli(argc, argv, std::cout, std::cerr); }

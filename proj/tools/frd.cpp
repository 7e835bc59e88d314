#include "frd/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return frd::run_cli(argc, argv, std::cout, std::cerr); }

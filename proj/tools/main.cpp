#include <iostream>

#include "lfcal/cli.hpp"

int main(int argc, char** argv) { return lfcal::run_cli(argc, argv, std::cout, std::cerr); }

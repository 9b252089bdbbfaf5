#include "cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return findtrack::run_cli(argc, argv, std::cout, std::cerr); }

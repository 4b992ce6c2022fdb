#include "embnli/cli.hpp"

#include <iostream>

int main(int argc, char** argv) { return embnli::run_cli(argc, argv, std::cout, std::cerr); }

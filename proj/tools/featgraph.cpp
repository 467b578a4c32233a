#include <iostream>

#include "featgraph/cli.hpp"

int main(int argc, char** argv) { return featgraph::cli::main_entry(argc, argv, std::cout, std::cerr); }

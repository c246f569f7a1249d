#include "heidih/cli_io.hpp"

#include <iostream>

int main(int argc, char** argv) { return heidih::cli::run(argc, argv, std::cout, std::cerr); }

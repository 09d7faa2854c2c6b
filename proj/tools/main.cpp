#include <iostream>

#include "hallci/cli.hpp"

int main(int argc, char** argv) { return hallci::cli::run(argc, argv, std::cout, std::cerr); }

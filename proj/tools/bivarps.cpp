#include <iostream>

#include "bivarps/cli.hpp"

int main(int argc, char** argv) { return bivarps::cli::run(argc, argv, std::cout, std::cerr); }

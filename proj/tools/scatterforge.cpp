#include <iostream>

#include "scatterforge/cli.hpp"

int main(int argc, char** argv) { return scatterforge::cli::dispatch(argc, argv, std::cout, std::cerr); }

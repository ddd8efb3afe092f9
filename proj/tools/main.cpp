#include <iostream>

#include "clinqa/cli.hpp"

int main(int argc, char** argv) { return clinqa::cli::run(argc, argv, std::cout, std::cerr); }

#include <iostream>

#include "shellspec/cli.hpp"

int main(int argc, char** argv) { return shellspec::cli::run(argc, argv, std::cout, std::cerr); }

#include <iostream>

#include "mfpi/cli.hpp"

int main(int argc, char** argv) { return mfpi::cli::main_entry(argc, argv, std::cout, std::cerr); }

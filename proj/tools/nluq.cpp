#include <iostream>

#include "nluq/cli.hpp"

int main(int argc, char** argv) { return nluq::run_cli(argc, argv, std::cout, std::cerr); }

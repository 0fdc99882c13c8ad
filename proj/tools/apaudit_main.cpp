#include <iostream>

#include "apaudit/cli.hpp"

int main(int argc, char** argv) { return apaudit::run_cli(argc, argv, std::cout, std::cerr); }

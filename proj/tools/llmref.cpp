#include <iostream>

#include "llmref/cli.hpp"

int main(int argc, char** argv) { return llmref::run_cli(argc, argv, std::cout, std::cerr); }

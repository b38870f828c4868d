#include <iostream>
#include <string>
#include <vector>

#include "fricsym/cli.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return fricsym::run_cli(args, std::cout, std::cerr);
}

#include <iostream>
#include <string>
#include <vector>

#include "forchestra/cli/run.hpp"

int main(int argc, char** argv) {
    std::vector<std::string> args(argv + 1, argv + argc);
    return forchestra::cli::run(args, std::cout, std::cerr);
}

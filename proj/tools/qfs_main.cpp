#include <iostream>
#include <string>
#include <vector>

#include "qfs/cli.hpp"

int main(int argc, char** argv) {
    const std::vector<std::string> args(argv, argv + argc);
    return qfs::cli::run(args, std::cout, std::cerr);
}

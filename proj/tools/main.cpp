#include <iostream>

#include "glaves/cli.hpp"

int main(int argc, char** argv) {
    return glaves::run_cli(argc, argv, std::cout, std::cerr);
}

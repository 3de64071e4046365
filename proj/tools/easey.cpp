#include "easey/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return easey::run_cli(argc, argv, std::cout, std::cerr);
}

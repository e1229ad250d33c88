#include <iostream>

#include "heatinv/cli.hpp"

int main(int argc, char** argv) {
    return heatinv::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}

#include <iostream>

#include "toytts/cli.hpp"

int main(int argc, char** argv) {
    return toytts::run_command(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}

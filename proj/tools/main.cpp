#include <iostream>

#include "commands.hpp"

int main(int argc, char** argv) {
    return pnc::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

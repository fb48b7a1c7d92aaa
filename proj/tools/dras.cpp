#include <iostream>
#include <string>
#include <vector>

#include "dras_cli.hpp"

int main(int argc, char** argv) {
    return dras::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

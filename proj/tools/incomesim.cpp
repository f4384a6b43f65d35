#include <iostream>

#include "income/cli.hpp"

int main(int argc, char** argv)
{
    return income::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

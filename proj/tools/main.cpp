#include <iostream>

#include "gridvqa/cli.hpp"

int main(int argc, char** argv)
{
    return gridvqa::run_cli(argc, argv, std::cout, std::cerr);
}

#include <iostream>

#include "constlab/cli.hpp"

int main(int argc, char** argv)
{
    return constlab::cli::run(argc, argv, std::cout, std::cerr);
}

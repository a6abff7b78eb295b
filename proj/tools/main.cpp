#include "labelshift/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return labelshift::cli_dispatch(argc, argv, std::cout, std::cerr);
}

#include <iostream>

#include "claimforge/cli.hpp"

int main(int argc, char** argv) {
  return claimforge::run_cli(argc, argv, std::cout, std::cerr);
}

#include <iostream>

#include "tcrisis/cli.hpp"

int main(int argc, char** argv) {
  return tcrisis::run_cli(argc, argv, std::cout, std::cerr);
}

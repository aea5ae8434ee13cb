#include <iostream>
#include <string>
#include <vector>

#include "edu4fd/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return edu4fd::run_cli(args, std::cout);
}

#include <iostream>
#include <string>
#include <vector>

#include "contrastner/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return contrastner::run_cli(args, std::cout, std::cerr);
}

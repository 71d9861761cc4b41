#include <iostream>
#include <string>
#include <vector>

#include "t3time/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return t3time::run_cli(args, std::cout, std::cerr);
}

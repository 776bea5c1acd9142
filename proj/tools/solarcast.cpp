#include <iostream>
#include <string>
#include <vector>

#include "solarcast/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return solarcast::run_cli(args, std::cout, std::cerr);
}

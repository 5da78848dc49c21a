#include <iostream>
#include <string>
#include <vector>

#include "panelkern/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return panelkern::run_cli(args, std::cout, std::cerr);
}

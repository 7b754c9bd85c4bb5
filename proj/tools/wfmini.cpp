#include <iostream>

#include "wfmini/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return wfmini::run_cli(args, std::cout, std::cerr);
}

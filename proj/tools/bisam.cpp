#include <iostream>
#include <string>
#include <vector>

#include "bisam/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return bisam::cli_dispatch(args, std::cout, std::cerr);
}

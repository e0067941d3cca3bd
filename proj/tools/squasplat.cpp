#include <iostream>
#include <string>
#include <vector>

#include "squasplat/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return squasplat::dispatch(args, std::cout, std::cerr);
}

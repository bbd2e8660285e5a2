#include <iostream>

#include "cli.hpp"
#include "ufse/tensor.hpp"

int main(int argc, char** argv) {
  ufse::keep_freed_memory();
  std::vector<std::string> args(argv + 1, argv + argc);
  return ufse::run_cli(args, std::cout, std::cerr);
}

#include <iostream>
#include <string>
#include <vector>

#include "imba_ids/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return imba_ids::cli::run(args, std::cout, std::cerr);
}

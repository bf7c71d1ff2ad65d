#include <iostream>
#include <string>
#include <vector>

#include "latcompass/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return latcompass::cli_run(args, std::cout, std::cerr);
}

#include <iostream>
#include <string>
#include <vector>

#include "csrnet/tools/cli.hpp"

int main(int argc, char** argv) {
  return csrnet::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}

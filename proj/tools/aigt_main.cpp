#include <iostream>
#include <string>
#include <vector>

#include "aigt/cli.hpp"

int main(int argc, char** argv) {
  std::ios::sync_with_stdio(false);
  return aigt::cli_main(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

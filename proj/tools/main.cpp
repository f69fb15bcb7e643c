#include <iostream>
#include <string>
#include <vector>

#include "ddfm/cli.hpp"

int main(int argc, char** argv) {
  return ddfm::cli::run_cli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}

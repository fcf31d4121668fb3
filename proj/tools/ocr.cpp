#include <iostream>
#include <string>
#include <vector>

#include "pocr/cli.hpp"

int main(int argc, char** argv) {
  return pocr::cli::run(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

#include <iostream>
#include <string>
#include <vector>

#include "twa/cli.hpp"

int main(int argc, char** argv) {
  return twa::run_subcommand(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

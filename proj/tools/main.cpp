#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) {
  return eicl::cli::execute(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}

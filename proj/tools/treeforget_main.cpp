#include <iostream>
#include <string>
#include <vector>

#include "treeforget/cli.hpp"

int main(int argc, char** argv) {
  return treeforget::cli::run(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}

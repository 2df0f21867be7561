#include <iostream>
#include <locale>

#include "ms3d/cli.hpp"

int main(int argc, char** argv) {
  std::locale::global(std::locale::classic());
  std::vector<std::string> args(argv + 1, argv + argc);
  return ms3d::cli::run(args, std::cout, std::cerr);
}

#include <iostream>

#include "levymin/io.hpp"

int main(int argc, char** argv) {
  return levymin::run_cli(argc, argv, std::cout, std::cerr);
}

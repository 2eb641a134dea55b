#include <iostream>
#include <string>
#include <vector>

#include "geosampler/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return geosampler::cli::run(std::move(args), std::cout, std::cerr);
}

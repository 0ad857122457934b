#include <iostream>
#include <string>
#include <vector>

#include "geoprobe/cli.h"

int main(int argc, char** argv) {
  return geoprobe::RunCli(std::vector<std::string>(argv + 1, argv + argc), std::cout, std::cerr);
}

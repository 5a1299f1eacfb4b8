#include <iostream>

#include "laeo/app.hpp"

int main(int argc, char** argv) {
  return laeo::RunCli(std::vector<std::string>(argv + 1, argv + argc),
                      std::cout, std::cerr);
}

#include "qpdecon/cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
  return qpdecon::run_cli(argc, argv, std::cout, std::cerr);
}

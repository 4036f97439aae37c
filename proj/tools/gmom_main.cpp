#include <string>
#include <vector>

#include "gmom/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return gmom::run_cli(args);
}

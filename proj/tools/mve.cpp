#include <string>
#include <vector>

#include "mve/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return mve::cli::run_cli(args);
}

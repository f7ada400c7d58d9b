#include <string>
#include <vector>

#include "smattack/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return smattack::cli::run(std::move(args));
}

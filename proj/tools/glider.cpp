#include <string>
#include <vector>

#include "glider/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return glider::cli_dispatch(args);
}

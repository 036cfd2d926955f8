#include "clid/cli.hpp"

int main(int argc, char** argv) {
  return clid::cli::run_cli(std::vector<std::string>(argv + 1, argv + argc));
}

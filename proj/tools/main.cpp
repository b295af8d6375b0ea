#include <string>
#include <vector>

#include "multical_cli.hpp"

int main(int argc, char** argv) {
  return multical::cli::dispatch(std::vector<std::string>(argv, argv + argc));
}

#include <string>
#include <vector>

#include "vineda/bench.hpp"

int main(int argc, char** argv) {
  return vineda::cli_main(std::vector<std::string>(argv + 1, argv + argc));
}

// Writes a synthetic phantom dataset for the CLI smoke test.
#include <cstdlib>
#include <iostream>

#include "phantom.hpp"

int main(int argc, char** argv) {
  if (argc < 3) {
    std::cerr << "usage: make_phantoms <root> <cases> [wall_mm]\n";
    return 2;
  }
  atriaseg::testing::PhantomSpec spec;
  spec.dims = {320, 320, 24};
  if (argc > 3) spec.wall_mm = std::atof(argv[3]);
  atriaseg::testing::write_phantom_dataset(argv[1], std::atoi(argv[2]), spec);
  return 0;
}

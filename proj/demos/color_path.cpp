// Red to blue on a single pixel. With a periodic colour axis the mass leaves
// red through the wrap-around edge and the path passes violet; with a mirror
// colour axis it has to cross green.

#include <cstdio>

#include "colorot/colorot.hpp"

using namespace colorot;

int main() {
  const NdArray<double> red({1, 1, 3}, std::vector<double>{1, 0, 0});
  const NdArray<double> blue({1, 1, 3}, std::vector<double>{0, 0, 1});
  for (BoundaryKind color : {BoundaryKind::Periodic, BoundaryKind::Mirror}) {
    const GridSpec grid{{1, 1, 3}, 16, BoundaryKind::Mirror, color};
    const Solution s = run_constrained(red, blue, grid, SolverConfig{});
    std::printf("colour boundary %s\n   t      R      G      B\n", to_string(color));
    for (std::size_t t = 0; t < s.frames.size(); t += 2) {
      const auto& f = s.frames[t];
      std::printf("%5.3f  %5.3f  %5.3f  %5.3f\n", static_cast<double>(t) / 16.0, f[0], f[1], f[2]);
    }
  }
}

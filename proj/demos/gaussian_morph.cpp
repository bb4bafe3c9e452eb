// Morphs a red Gaussian into a wider yellow one on a 32x32 grid and writes
// the frames as PNG files.
//
//   gaussian_morph [out_dir] [time_steps] [iterations]

#include <cmath>
#include <cstdio>
#include <cstdlib>

#include "colorot/io.hpp"

using namespace colorot;

namespace {

NdArray<double> gaussian(std::size_t n, double cx, double cy, double width, double r, double g,
                         double b) {
  NdArray<double> img({n, n, 3});
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) {
      const double dx = (x + 0.5) / n - cx, dy = (y + 0.5) / n - cy;
      const double v = std::exp(-(dx * dx + dy * dy) / (2 * width * width));
      img(x, y, 0) = r * v;
      img(x, y, 1) = g * v;
      img(x, y, 2) = b * v;
    }
  }
  return img;
}

}  // namespace

int main(int argc, char** argv) {
  const std::string out = argc > 1 ? argv[1] : "gaussian_frames";
  GridSpec grid{{32, 32, 3}, argc > 2 ? std::strtoul(argv[2], nullptr, 10) : 8};
  SolverConfig config;
  config.iterations = argc > 3 ? std::strtoul(argv[3], nullptr, 10) : 500;
  NdArray<double> f0 = gaussian(32, 0.3, 0.3, 0.08, 1, 0, 0);
  NdArray<double> f1 = gaussian(32, 0.7, 0.65, 0.12, 1, 1, 0);
  io::equalize_mass(f0, f1);
  const Solution s = run_constrained(f0, f1, grid, config, [&](const IterationRecord& r) {
    if (r.iteration % 100 == 0) {
      std::printf("iter %4zu  energy %.5e  dual residual %.2e\n", r.iteration, r.energy,
                  r.dual_residual);
    }
  });
  const auto files = io::emit_frames(s.frames, out, io::FrameFormat::PngSeq);
  std::printf("wrote %zu frames to %s\n", files.size(), out.c_str());
}

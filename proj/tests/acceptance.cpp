// Acceptance checks. Prints one PASS/FAIL line per criterion and exits with
// status 1 if any selected criterion fails.
//
//   acceptance            run all twelve
//   acceptance 3 5        run a subset

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <complex>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "colorot/colorot.hpp"
#include "colorot/dense_oracle.hpp"
#include "colorot/io.hpp"
#include "prox_oracle.hpp"
#include "test_support.hpp"

using namespace colorot;
using dense::Matrix;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* format, auto... args) {
  char buffer[512];
  std::snprintf(buffer, sizeof buffer, format, args...);
  return buffer;
}

Eigen::VectorXd to_eigen(std::span<const double> v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

double relative_error(std::span<const double> a, std::span<const double> b) {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  return tk::norm2(d) / std::max(tk::norm2(b), 1e-300);
}

double mass(const NdArray<double>& f) {
  double total = 0.0;
  for (double v : f.storage()) total += v;
  return total;
}

NdArray<double> random_layer(const GridSpec& grid, std::uint64_t seed) {
  return NdArray<double>(grid.layer_extents(), tk::random_vector(grid.cells(), seed, 0.25, 1.0));
}

// Shared instances ---------------------------------------------------------

struct Instance {
  std::string name;
  GridSpec grid;
  NdArray<double> f0, f1;
};

/// f0 = f1: a random 16-sample signal and a random 8x8 RGB image, P = 8.
std::vector<Instance> identity_instances() {
  const GridSpec signal{{16}, 8};
  const GridSpec image{{8, 8, 3}, 8};
  const auto s = random_layer(signal, 601);
  const auto i = random_layer(image, 602);
  return {{"signal 16", signal, s, s}, {"rgb 8x8", image, i, i}};
}

/// Unit masses at 0.25 and 0.75 (two cells each), N = 32, P = 16, mirror.
Instance two_spikes() {
  const GridSpec grid{{32}, 16};
  std::vector<double> a(32, 0.0), b(32, 0.0);
  a[7] = a[8] = 0.5;
  b[23] = b[24] = 0.5;
  return {"two spikes", grid, NdArray<double>({32}, a), NdArray<double>({32}, b)};
}

NdArray<double> gaussian_image(std::size_t n, double cx, double cy, double width,
                               std::array<double, 3> rgb) {
  NdArray<double> img({n, n, 3});
  for (std::size_t y = 0; y < n; ++y) {
    for (std::size_t x = 0; x < n; ++x) {
      const double dx = (x + 0.5) / n - cx, dy = (y + 0.5) / n - cy;
      const double v = std::exp(-(dx * dx + dy * dy) / (2 * width * width));
      for (std::size_t c = 0; c < 3; ++c) img(x, y, c) = rgb[c] * v;
    }
  }
  return img;
}

// Criteria -----------------------------------------------------------------

Outcome transforms() {
  double worst = 0.0;
  for (std::size_t n = 2; n <= 64; ++n) {
    const auto v = tk::random_vector(n, n);
    worst = std::max(worst, tk::max_abs_diff(dct2(v), to_std(dense::dct_matrix(n) * to_eigen(v))));
    worst = std::max(worst, tk::max_abs_diff(dst1(v), to_std(dense::dst_matrix(n + 1) * to_eigen(v))));
    worst = std::max(worst, tk::max_abs_diff(dst1(dst1(v)), v));
    worst = std::max(worst, tk::max_abs_diff(idct2(dct2(v)), v));
    const auto im = tk::random_vector(n, 1000 + n);
    std::vector<std::complex<double>> z(n);
    Eigen::VectorXcd ez(static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k < n; ++k) {
      z[k] = {v[k], im[k]};
      ez(static_cast<Eigen::Index>(k)) = z[k];
    }
    const Eigen::VectorXcd expected = dense::dft_matrix(n) * ez;
    const auto got = dft(z);
    const auto back = idft(got);
    for (std::size_t k = 0; k < n; ++k) {
      worst = std::max(worst, std::abs(got[k] - expected(static_cast<Eigen::Index>(k))));
      worst = std::max(worst, std::abs(back[k] - z[k]));
    }
  }
  return {worst <= 1e-12, fmt("max error %.2e (tol 1e-12), n = 2..64", worst)};
}

Outcome diagonalization() {
  double worst = 0.0;
  auto diag = [](const std::vector<double>& d) -> Matrix { return to_eigen(d).asDiagonal(); };
  for (std::size_t n = 2; n <= 16; ++n) {
    const double n2 = static_cast<double>(n * n);
    const Matrix D = dense::difference(n), Dp = dense::difference_periodic(n);
    const Matrix S = dense::dst_matrix(n), C = dense::dct_matrix(n);
    const Matrix zero = S * diag(laplacian_eigs(SpectrumKind::Zero, n)) * S;
    worst = std::max(worst, (D * D.transpose() / n2 - zero).cwiseAbs().maxCoeff());
    const Matrix mirr = C.transpose() * diag(laplacian_eigs(SpectrumKind::Mirror, n)) * C;
    worst = std::max(worst, (D.transpose() * D / n2 - mirr).cwiseAbs().maxCoeff());
    const dense::ComplexMatrix F = dense::dft_matrix(n);
    const Eigen::VectorXd dper = to_eigen(laplacian_eigs(SpectrumKind::Periodic, n));
    const dense::ComplexMatrix per =
        F.conjugate() * dper.cast<std::complex<double>>().asDiagonal() * F;
    worst = std::max(worst,
                     ((Dp.transpose() * Dp / n2).cast<std::complex<double>>() - per).cwiseAbs().maxCoeff());
    // D_n / n = -S (0 | diag(sqrt d^zero)) C with these sign conventions.
    auto root = laplacian_eigs(SpectrumKind::Zero, n);
    Matrix middle = Matrix::Zero(static_cast<Eigen::Index>(n - 1), static_cast<Eigen::Index>(n));
    for (std::size_t k = 0; k + 1 < n; ++k) {
      middle(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(k + 1)) = std::sqrt(root[k]);
    }
    worst = std::max(worst, (S * middle * C + D / static_cast<double>(n)).cwiseAbs().maxCoeff());
  }
  return {worst <= 1e-12, fmt("max error %.2e (tol 1e-12), n = 2..16", worst)};
}

Outcome pseudo_inverse() {
  std::vector<GridSpec> grids;
  for (BoundaryKind b : {BoundaryKind::Mirror, BoundaryKind::Periodic}) {
    for (std::size_t n : {2u, 3u, 5u, 8u}) {
      for (std::size_t p : {2u, 4u, 6u}) grids.push_back({{n}, p, b});
    }
    for (BoundaryKind c : {BoundaryKind::Mirror, BoundaryKind::Periodic}) {
      grids.push_back({{4, 3, 3}, 3, b, c});
    }
  }
  double worst = 0.0;
  std::uint64_t seed = 3000;
  for (const GridSpec& grid : grids) {
    const OperatorSet ops(grid, random_layer(grid, seed), random_layer(grid, seed + 1));
    seed += 2;
    const ProjectionPlan plan(ops);
    const Matrix A = dense::build_operators(grid).A;
    const Matrix pinv = dense::dense_oracle(grid, dense::OracleKind::PseudoInverse);
    const Eigen::VectorXd fm = to_eigen(ops.f_minus());
    for (int trial = 0; trial < 20; ++trial) {
      const auto x = tk::random_vector(ops.sizes().total(), seed++);
      const Eigen::VectorXd ex = to_eigen(x);
      const Eigen::VectorXd expected = ex - A.transpose() * (pinv * (A * ex - fm));
      worst = std::max(worst, relative_error(plan.project(x), to_std(expected)));
    }
  }
  return {worst <= 1e-10,
          fmt("max relative error %.2e (tol 1e-10), %zu grids x 20 vectors", worst, grids.size())};
}

Outcome schur() {
  double worst = 0.0;
  std::size_t cases = 0;
  std::uint64_t seed = 4000;
  for (BoundaryKind b : {BoundaryKind::Mirror, BoundaryKind::Periodic}) {
    for (std::size_t n : {2u, 3u, 5u, 8u}) {
      for (std::size_t p : {2u, 3u, 6u}) {
        const GridSpec grid{{n}, p, b};
        const OperatorSet ops(grid, random_layer(grid, seed), random_layer(grid, seed + 1));
        seed += 2;
        for (double lambda : {0.1, 1.0, 100.0}) {
          const SchurPlan plan(ops, lambda, 0.02);
          const Matrix inv =
              dense::dense_oracle(grid, dense::OracleKind::PenalizedInverse, lambda, 0.02);
          const auto rhs = tk::random_vector(ops.sizes().total(), seed++);
          const auto x = solve_penalized_step(rhs, plan);
          worst = std::max(worst, relative_error(x, to_std(inv * to_eigen(rhs))));
          ++cases;
        }
      }
    }
  }
  return {worst <= 1e-10, fmt("max relative error %.2e (tol 1e-10), %zu cases", worst, cases)};
}

Outcome prox() {
  std::mt19937_64 rng(5000);
  double worst_ref = 0.0, worst_moreau = 0.0;
  std::size_t within = 0;
  for (int i = 0; i < 1000; ++i) {
    const tk::ProxSample s = tk::random_prox_sample(rng);
    std::vector<double> x(s.x.size());
    std::size_t iterations = 0;
    const double y = prox_Jp(s.x, s.y, ProxParams{s.p, s.sigma}, x, &iterations);
    const tk::ProxReference ref = tk::prox_by_bisection(s.x, s.y, s.p, s.sigma);
    worst_ref = std::max({worst_ref, tk::max_abs_diff(x, ref.x), std::abs(y - ref.y)});
    worst_moreau = std::max(worst_moreau, tk::moreau_residual(s.x, s.y, x, y, s.p, s.sigma));
    within += iterations <= 12 ? 1 : 0;
  }
  const bool pass = worst_ref <= 1e-11 && worst_moreau <= 1e-11 && within >= 990;
  return {pass, fmt("oracle error %.2e, Moreau residual %.2e (tol 1e-11), %zu/1000 within 12 "
                    "Newton steps (need 990)",
                    worst_ref, worst_moreau, within)};
}

Outcome identity() {
  bool pass = true;
  std::string detail;
  for (const Instance& inst : identity_instances()) {
    const Solution s = run_constrained(inst.f0, inst.f1, inst.grid, SolverConfig{});
    double deviation = 0.0;
    for (const auto& frame : s.frames) {
      deviation = std::max(deviation, tk::max_abs_diff(frame.storage(), inst.f0.storage()));
    }
    const double e = s.report.energy_trace.back();
    pass = pass && e <= 1e-6 && deviation <= 1e-3;
    detail += fmt("%s: energy %.2e (tol 1e-6), max deviation %.2e (tol 1e-3); ",
                  inst.name.c_str(), e, deviation);
  }
  detail += "sigma 50, tau 0.99/sigma, 2000 iterations";
  return {pass, detail};
}

Outcome mass_conservation() {
  auto instances = identity_instances();
  instances.push_back(two_spikes());
  double worst = 0.0, worst_dual = 0.0;
  for (const Instance& inst : instances) {
    const Solution s = run_constrained(inst.f0, inst.f1, inst.grid, SolverConfig{});
    const double m0 = mass(inst.f0);
    for (const auto& frame : s.frames) worst = std::max(worst, std::abs(mass(frame) - m0));
    worst_dual = std::max(worst_dual, s.report.dual_residual_trace.back());
  }
  return {worst <= 1e-6,
          fmt("max per-layer mass deviation %.2e (tol 1e-6); final dual residual <= %.2e",
              worst, worst_dual)};
}

Outcome color_path() {
  const NdArray<double> red({1, 1, 3}, std::vector<double>{1, 0, 0});
  const NdArray<double> blue({1, 1, 3}, std::vector<double>{0, 0, 1});
  const GridSpec periodic{{1, 1, 3}, 16, BoundaryKind::Mirror, BoundaryKind::Periodic};
  const GridSpec mirror{{1, 1, 3}, 16, BoundaryKind::Mirror, BoundaryKind::Mirror};
  const Solution a = run_constrained(red, blue, periodic, SolverConfig{});
  const Solution b = run_constrained(red, blue, mirror, SolverConfig{});
  double max_green = 0.0;
  for (std::size_t t = 1; t < 16; ++t) max_green = std::max(max_green, a.frames[t][1]);
  const double violet = a.frames[8][0] + a.frames[8][2];
  const double green_mirror = b.frames[8][1];
  const bool pass = max_green <= 0.1 && violet >= 0.5 && green_mirror > 0.2;
  return {pass, fmt("periodic: max green %.3f (<= 0.1), R+B at t=1/2 %.3f (>= 0.5); "
                    "mirror: green at t=1/2 %.3f (> 0.2)",
                    max_green, violet, green_mirror)};
}

Outcome penalized_limit() {
  const GridSpec grid{{32, 32, 3}, 32};
  const auto f0 = gaussian_image(32, 0.3, 0.3, 0.08, {1.0, 0.0, 0.0});
  const auto f1 = gaussian_image(32, 0.7, 0.65, 0.1, {1.0, 1.0, 0.0});
  const std::size_t mid = grid.time_steps / 2;
  const Solution constrained = run_constrained(f0, f1, grid, SolverConfig{});
  std::vector<double> distances;
  for (double lambda : {0.1, 1.0, 10.0, 100.0}) {
    SolverConfig config;
    config.lambda = lambda;
    const Solution s = run_penalized(f0, f1, grid, config);
    std::vector<double> d(s.frames[mid].size());
    for (std::size_t i = 0; i < d.size(); ++i) d[i] = s.frames[mid][i] - constrained.frames[mid][i];
    distances.push_back(tk::norm2(d));
  }
  bool decreasing = true;
  for (std::size_t i = 1; i < distances.size(); ++i) decreasing = decreasing && distances[i] < distances[i - 1];
  return {decreasing, fmt("mid-frame L2 distance for lambda 0.1, 1, 10, 100: %.4e %.4e %.4e %.4e "
                          "(masses %.3f vs %.3f)",
                          distances[0], distances[1], distances[2], distances[3], mass(f0), mass(f1))};
}

Outcome non_uniqueness() {
  const GridSpec grid{{4}, 4, BoundaryKind::Periodic};
  const std::vector<double> alt{1, -1, 1, -1};
  const NdArray<double> f0({4}, std::vector<double>{2, 1, 2, 1});
  const NdArray<double> f1({4}, std::vector<double>{2.5, 0.5, 2.5, 0.5});
  const OperatorSet ops(grid, f0, f1);
  // m = w (x) alt lies in ker S_m; the layers follow from the constraint.
  double family_energy = 0.0, family_residual = 0.0;
  for (const std::vector<double>& w : {std::vector<double>{0.0625, 0.0625, 0.0625, 0.0625},
                                       std::vector<double>{0.25, 0.0, -0.125, 0.125}}) {
    std::vector<double> x;
    for (double wt : w) {
      for (double a : alt) x.push_back(wt * a);
    }
    double acc = 0.0;
    for (std::size_t k = 0; k + 1 < 4; ++k) {
      acc += 2.0 * w[k];
      for (std::size_t c = 0; c < 4; ++c) x.push_back(f0[c] + acc * alt[c]);
    }
    family_energy = std::max(family_energy, energy(x, ops, 2.0));
    family_residual = std::max(family_residual, ops.residual(x));
  }
  const Solution s = run_constrained(f0, f1, grid, SolverConfig{});
  const double solver_energy = energy(s.momentum, s.density, ops, 2.0);
  const double solver_residual = residual(s.momentum, s.density, ops);
  const double gap = std::abs(solver_energy - family_energy);
  const bool pass = gap <= 1e-8 && family_residual <= 1e-12 && solver_residual <= 1e-12;
  return {pass, fmt("family energy %.2e, solver energy %.2e, gap %.2e (tol 1e-8); residuals "
                    "%.2e / %.2e (tol 1e-12)",
                    family_energy, solver_energy, gap, family_residual, solver_residual)};
}

Outcome tv_variant() {
  const GridSpec grid{{64}, 32};
  std::vector<double> a(64, 0.1), b(64, 0.1);
  for (std::size_t c = 8; c < 24; ++c) a[c] = 1.0;
  for (std::size_t c = 36; c < 52; ++c) b[c] = 1.0;
  const NdArray<double> f0({64}, a), f1({64}, b);
  SolverConfig config;
  const Solution plain = run_constrained(f0, f1, grid, config);
  const Solution zero = run_with_tv(f0, f1, grid, config);
  config.tv_gamma = 0.03;
  const Solution tv = run_with_tv(f0, f1, grid, config);
  std::size_t lower = 0, frames = 0;
  double worst_excess = -1e300;
  for (std::size_t t = 1; t < grid.time_steps; ++t) {
    const double with = spatial_tv(tv.frames[t], grid), without = spatial_tv(plain.frames[t], grid);
    lower += with <= without ? 1 : 0;
    worst_excess = std::max(worst_excess, with - without);
    ++frames;
  }
  bool bitwise = plain.frames.size() == zero.frames.size();
  for (std::size_t t = 0; bitwise && t < plain.frames.size(); ++t) {
    bitwise = std::memcmp(plain.frames[t].storage().data(), zero.frames[t].storage().data(),
                          plain.frames[t].size() * sizeof(double)) == 0;
  }
  const auto mp = flatten(plain.momentum, grid), mz = flatten(zero.momentum, grid);
  bitwise = bitwise && std::memcmp(mp.data(), mz.data(), mp.size() * sizeof(double)) == 0;
  return {lower == frames && bitwise,
          fmt("TV(gamma=0.03) <= TV(plain) on %zu/%zu frames (max excess %.3e); gamma = 0 "
              "bitwise identical: %s",
              lower, frames, worst_excess, bitwise ? "yes" : "no")};
}

Outcome determinism() {
  namespace fs = std::filesystem;
  const fs::path root = fs::temp_directory_path() / "colorot_acceptance_determinism";
  fs::remove_all(root);
  fs::create_directories(root);
  bool pass = true;
  std::string detail;
  for (const Instance& inst : identity_instances()) {
    io::RunRequest request;
    if (inst.grid.axes() == 1) {
      std::string text;
      for (double v : inst.f0.storage()) text += fmt("%.17g\n", v);
      std::ofstream(root / "signal.csv") << text;
      request.input0 = request.input1 = root / "signal.csv";
      request.mode = io::InputMode::SignalCsv;
    } else {
      io::save_png(inst.f0, root / "image.png");
      request.input0 = request.input1 = root / "image.png";
      request.mode = io::InputMode::ImagePng;
    }
    request.grid.time_steps = inst.grid.time_steps;
    request.out_dir = root / "run";
    request.format = io::FrameFormat::RawF64;
    io::execute(request);
    const std::string manifest = io::read_text(root / "run" / "manifest.json");
    const std::string frames = io::read_text(root / "run" / "frames.f64");
    io::execute(request);
    const bool same = manifest == io::read_text(root / "run" / "manifest.json") &&
                      frames == io::read_text(root / "run" / "frames.f64");
    pass = pass && same;
    detail += fmt("%s: %s; ", inst.name.c_str(), same ? "identical" : "DIFFERENT");
  }
  fs::remove_all(root);
  detail += "manifest.json and frames.f64 compared byte for byte";
  return {pass, detail};
}

struct Criterion {
  int id;
  const char* name;
  Outcome (*run)();
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> list{
      {1, "transform correctness", transforms},
      {2, "diagonalization identities", diagonalization},
      {3, "spectral pseudo-inverse vs dense", pseudo_inverse},
      {4, "Schur solve vs dense inverse", schur},
      {5, "prox oracle equivalence", prox},
      {6, "identity transport", identity},
      {7, "mass conservation", mass_conservation},
      {8, "colour path", color_path},
      {9, "penalized to constrained limit", penalized_limit},
      {10, "non-uniqueness construction", non_uniqueness},
      {11, "TV variant", tv_variant},
      {12, "determinism", determinism},
  };
  return list;
}

}  // namespace

int main(int argc, char** argv) {
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  int failures = 0;
  for (const Criterion& c : criteria()) {
    if (!selected.empty() && std::find(selected.begin(), selected.end(), c.id) == selected.end()) {
      continue;
    }
    const auto start = std::chrono::steady_clock::now();
    Outcome outcome;
    try {
      outcome = c.run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::printf("[%s] %2d %s: %s (%.1f s)\n", outcome.pass ? "PASS" : "FAIL", c.id, c.name,
                outcome.detail.c_str(), seconds);
    std::fflush(stdout);
    failures += outcome.pass ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}

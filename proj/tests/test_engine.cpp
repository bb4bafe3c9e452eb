#include <gtest/gtest.h>

#include <cstring>

#include "colorot/engine.hpp"
#include "test_support.hpp"

using namespace colorot;

namespace {

NdArray<double> signal(std::vector<double> v) {
  const std::size_t n = v.size();
  return NdArray<double>({n}, std::move(v));
}

std::vector<double> spikes(std::size_t n, std::size_t left) {
  std::vector<double> v(n, 0.0);
  v[left] = 0.5;
  v[left + 1] = 0.5;
  return v;
}

double center_of_mass(const NdArray<double>& f) {
  const double n = static_cast<double>(f.size());
  double mass = 0.0, moment = 0.0;
  for (std::size_t c = 0; c < f.size(); ++c) {
    mass += f[c];
    moment += f[c] * (static_cast<double>(c) + 0.5) / n;
  }
  return moment / mass;
}

double mass(const NdArray<double>& f) {
  double total = 0.0;
  for (double v : f.storage()) total += v;
  return total;
}

bool bitwise_equal(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

SolverConfig short_config(std::size_t iterations) {
  SolverConfig config;
  config.iterations = iterations;
  return config;
}

}  // namespace

TEST(SolverConfig, Validation) {
  SolverConfig config;
  EXPECT_NO_THROW(config.validate());
  config.tau = 1.0 / config.sigma;
  EXPECT_THROW(config.validate(), std::invalid_argument);
  config = {};
  config.theta = 0.0;
  EXPECT_THROW(config.validate(), std::invalid_argument);
  config = {};
  config.model = Model::Penalized;
  config.lambda = 0.0;
  EXPECT_THROW(config.validate(), std::invalid_argument);
  config = {};
  config.tv_mode = TvMode::Isotropic;
  EXPECT_THROW(config.validate(), UnsupportedFeature);
  config = {};
  config.p = 1.0;
  EXPECT_THROW(config.validate(), std::invalid_argument);
  EXPECT_EQ(model_from_string("penalized"), Model::Penalized);
  EXPECT_THROW(model_from_string("balanced"), std::invalid_argument);
}

TEST(Engine, RejectsBadInputs) {
  const GridSpec grid{{4}, 4};
  EXPECT_THROW(run_constrained(signal({1, 1, 1, 1}), signal({1, 1, 1}), grid, {}), ShapeError);
  EXPECT_THROW(run_constrained(signal({1, -1, 1, 1}), signal({1, 1, 1, 1}), grid, {}),
               std::invalid_argument);
}

TEST(Energy, FormulaAndInfeasibility) {
  EXPECT_DOUBLE_EQ(eval_Jp(2.0, 4.0, 2.0), 0.5);
  const GridSpec grid{{3}, 2};
  const auto f0 = signal({1, 2, 3});
  const OperatorSet ops(grid, f0, f0);
  FaceField m{{NdArray<double>(grid.face_extents(0))}};
  CenterField f{NdArray<double>(grid.interior_extents(), f0.storage()), f0, f0};
  EXPECT_EQ(energy(m, f, ops, 2.0), 0.0);
  EXPECT_EQ(residual(m, f, ops), 0.0);
  f.interior[0] = -5.0;
  EXPECT_EQ(energy(m, f, ops, 2.0), std::numeric_limits<double>::infinity());
}

TEST(Engine, IdentityTransport) {
  // Steps balanced for data of unit scale (sigma tau stays 0.99).
  const GridSpec grid{{16}, 8};
  const auto f0 = signal(tk::random_vector(16, 3, 0.25, 1.0));
  SolverConfig config;
  config.sigma = 0.05;
  config.tau = 0.99 / config.sigma;
  const Solution s = run_constrained(f0, f0, grid, config);
  ASSERT_EQ(s.frames.size(), 9u);
  EXPECT_EQ(s.frames.front(), f0);
  EXPECT_EQ(s.frames.back(), f0);
  EXPECT_LE(s.report.energy_trace.back(), 1e-6);
  EXPECT_LE(s.report.dual_residual_trace.back(), 1e-4);
  for (const auto& frame : s.frames) {
    EXPECT_LE(tk::max_abs_diff(frame.storage(), f0.storage()), 1e-3);
    EXPECT_NEAR(mass(frame), mass(f0), 1e-6);
  }
}

TEST(Engine, TwoSpikesMoveLinearly) {
  const GridSpec grid{{32}, 16};
  const auto f0 = signal(spikes(32, 7)), f1 = signal(spikes(32, 23));
  const Solution s = run_constrained(f0, f1, grid, {});
  EXPECT_LE(s.report.dual_residual_trace.back(), 1e-4);
  EXPECT_LE(s.report.residual_trace.back(), 1e-10);
  double previous = 0.0;
  for (std::size_t t = 0; t < s.frames.size(); ++t) {
    const auto& frame = s.frames[t];
    EXPECT_NEAR(mass(frame), 1.0, 1e-6) << t;
    const double com = center_of_mass(frame);
    const double expected = 0.25 + 0.5 * static_cast<double>(t) / 16.0;
    EXPECT_NEAR(com, expected, 0.05 * 0.5) << t;
    if (t > 0) {
      EXPECT_GT(com, previous) << t;
    }
    previous = com;
  }
  EXPECT_NEAR(center_of_mass(s.frames.front()), 0.25, 1e-15);
  EXPECT_NEAR(center_of_mass(s.frames.back()), 0.75, 1e-15);
}

TEST(Engine, VelocityRatioIndependentOfDualStart) {
  const GridSpec grid{{32}, 16};
  const auto f0 = signal(spikes(32, 7)), f1 = signal(spikes(32, 23));
  SolverConfig a_config, b_config;
  a_config.iterations = b_config.iterations = 10000;
  a_config.dual_seed = 1;
  b_config.dual_seed = 2;
  TransportSolver a_solver(grid, f0, f1, a_config), b_solver(grid, f0, f1, b_config);
  const Solution a = a_solver.run(), b = b_solver.run();
  const OperatorSet& ops = a_solver.operators();
  auto ratios = [&](const Solution& s) {
    const auto m = flatten(s.momentum, grid);
    const auto f = flatten(s.density, grid);
    std::vector<double> u(ops.midpoint_size()), v(ops.midpoint_size());
    ops.apply_Sm(m, u);
    ops.apply_Sf_plus(f, v);
    return std::pair{u, v};
  };
  const auto [ua, va] = ratios(a);
  const auto [ub, vb] = ratios(b);
  std::size_t checked = 0;
  for (std::size_t i = 0; i < va.size(); ++i) {
    if (va[i] >= 1e-2 && vb[i] >= 1e-2) {
      EXPECT_NEAR(ua[i] / va[i], ub[i] / vb[i], 1e-3) << i;
      ++checked;
    }
  }
  EXPECT_GT(checked, 16u);
}

TEST(Engine, NonUniqueFamilyHasSolverEnergy) {
  // Periodic N = P = 4, f1 = f0 + gamma (1,-1,1,-1). With m = w (x) alt,
  // S_m m = 0 and the layers are f_k = f0 + (2N/P)(w_1 + ... + w_k) alt.
  const GridSpec grid{{4}, 4, BoundaryKind::Periodic};
  const std::vector<double> alt{1, -1, 1, -1};
  const auto f0 = signal({2, 1, 2, 1});
  const auto f1 = signal({2.5, 0.5, 2.5, 0.5});
  const OperatorSet ops(grid, f0, f1);
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
    EXPECT_LE(ops.residual(x), 1e-14);
    EXPECT_EQ(energy(x, ops, 2.0), 0.0);
  }
  const Solution s = run_constrained(f0, f1, grid, {});
  EXPECT_LE(s.report.residual_trace.back(), 1e-12);
  EXPECT_LE(std::abs(s.report.energy_trace.back() - 0.0), 1e-8);
}

TEST(Engine, PenalizedSmallLambdaKeepsMomentumSmall) {
  const GridSpec grid{{16}, 8};
  const auto f0 = signal(tk::random_vector(16, 5, 0.25, 1.0));
  const auto f1 = signal(tk::random_vector(16, 6, 0.25, 1.0));
  SolverConfig config = short_config(10);
  config.lambda = 1e-6;
  const Solution s = run_penalized(f0, f1, grid, config);
  double largest = 0.0;
  for (const auto& block : s.momentum.blocks) largest = std::max(largest, tk::max_abs(block.storage()));
  EXPECT_LE(largest, 1e-3);
}

TEST(Engine, PenalizedLargeLambdaIsNearlyFeasible) {
  const GridSpec grid{{16}, 8};
  auto v0 = tk::random_vector(16, 7, 0.25, 1.0), v1 = tk::random_vector(16, 8, 0.25, 1.0);
  double m0 = 0.0, m1 = 0.0;
  for (std::size_t i = 0; i < 16; ++i) { m0 += v0[i]; m1 += v1[i]; }
  for (double& v : v1) v *= m0 / m1;
  SolverConfig config;
  config.lambda = 1e4;
  const Solution s = run_penalized(signal(v0), signal(v1), grid, config);
  EXPECT_LE(s.report.residual_trace.back(), 1e-3);
  for (const auto& frame : s.frames) {
    for (double v : frame.storage()) EXPECT_TRUE(std::isfinite(v));
  }
}

TEST(Engine, PenalizedCgMatchesSchurRun) {
  const GridSpec grid{{8}, 4};
  const auto f0 = signal(tk::random_vector(8, 9, 0.25, 1.0));
  const auto f1 = signal(tk::random_vector(8, 10, 0.25, 1.0));
  SolverConfig config = short_config(50);
  config.lambda = 10.0;
  config.penalized_method = PenalizedMethod::Schur;
  const Solution a = run_penalized(f0, f1, grid, config);
  config.penalized_method = PenalizedMethod::ConjugateGradient;
  const Solution b = run_penalized(f0, f1, grid, config);
  for (std::size_t t = 0; t < a.frames.size(); ++t) {
    EXPECT_LE(tk::max_abs_diff(a.frames[t].storage(), b.frames[t].storage()), 1e-8);
  }
}

TEST(Engine, TvWithZeroGammaIsBitwisePlain) {
  const GridSpec grid{{16}, 8};
  const auto f0 = signal(tk::random_vector(16, 11, 0.25, 1.0));
  const auto f1 = signal(tk::random_vector(16, 12, 0.25, 1.0));
  const SolverConfig config = short_config(200);
  const Solution plain = run_constrained(f0, f1, grid, config);
  const Solution tv = run_with_tv(f0, f1, grid, config);
  ASSERT_EQ(plain.frames.size(), tv.frames.size());
  for (std::size_t t = 0; t < plain.frames.size(); ++t) {
    EXPECT_TRUE(bitwise_equal(plain.frames[t].storage(), tv.frames[t].storage())) << t;
  }
  EXPECT_TRUE(bitwise_equal(flatten(plain.momentum, grid), flatten(tv.momentum, grid)));
  EXPECT_TRUE(bitwise_equal(plain.report.energy_trace, tv.report.energy_trace));
}

TEST(Engine, TvLowersFrameVariation) {
  const GridSpec grid{{32}, 8};
  std::vector<double> a(32, 0.1), b(32, 0.1);
  for (std::size_t c = 4; c < 12; ++c) a[c] = 1.0;
  for (std::size_t c = 18; c < 26; ++c) b[c] = 1.0;
  SolverConfig config;
  const Solution plain = run_constrained(signal(a), signal(b), grid, config);
  config.tv_gamma = 0.03;
  const Solution tv = run_with_tv(signal(a), signal(b), grid, config);
  for (std::size_t t = 1; t + 1 < plain.frames.size(); ++t) {
    EXPECT_LE(spatial_tv(tv.frames[t], grid), spatial_tv(plain.frames[t], grid)) << t;
  }
}

TEST(Engine, TvOperatorAdjointAndNorm) {
  for (const GridSpec& grid : {GridSpec{{6}, 3}, GridSpec{{5, 4}, 3, BoundaryKind::Periodic},
                               GridSpec{{4, 3, 3}, 2}}) {
    const TvOperator tv(grid);
    const std::size_t nf = element_count(grid.interior_extents());
    const auto f = tk::random_vector(nf, 1), w = tk::random_vector(tv.size(), 2);
    std::vector<double> df(tv.size()), dtw(nf, 0.0);
    tv.apply(f, df);
    tv.apply_adjoint_add(w, dtw);
    EXPECT_NEAR(tk::dot(df, w), tk::dot(f, dtw), 1e-12);
    // Power iteration: |Dt| <= 1 with equality in the limit.
    std::vector<double> x = tk::random_vector(nf, 3);
    double estimate = 0.0;
    for (int it = 0; it < 500; ++it) {
      tv.apply(x, df);
      std::fill(dtw.begin(), dtw.end(), 0.0);
      tv.apply_adjoint_add(df, dtw);
      estimate = tk::norm2(dtw) / tk::norm2(x);
      for (std::size_t i = 0; i < nf; ++i) x[i] = dtw[i] / tk::norm2(dtw);
    }
    EXPECT_LE(estimate, 1.0 + 1e-12);
    EXPECT_GT(estimate, 0.95);
  }
}

TEST(Engine, SpatialTvOfLayer) {
  const GridSpec grid{{4}, 2};
  EXPECT_DOUBLE_EQ(spatial_tv(signal({0, 1, 1, 0}), grid), 8.0);
  const GridSpec per{{4}, 2, BoundaryKind::Periodic};
  EXPECT_DOUBLE_EQ(spatial_tv(signal({0, 1, 1, 3}), per), 4.0 * 6.0);
}

TEST(Engine, DeterministicAndClamped) {
  const GridSpec grid{{3, 3, 3}, 4};
  const auto v0 = tk::random_vector(27, 13, 0.0, 1.0), v1 = tk::random_vector(27, 14, 0.0, 1.0);
  const NdArray<double> f0(grid.layer_extents(), v0), f1(grid.layer_extents(), v1);
  SolverConfig config = short_config(30);
  std::vector<IterationRecord> seen;
  const Solution a = run_constrained(f0, f1, grid, config,
                                     [&](const IterationRecord& r) { seen.push_back(r); });
  const Solution b = run_constrained(f0, f1, grid, config);
  ASSERT_EQ(seen.size(), 30u);
  EXPECT_EQ(seen.back().iteration, 30u);
  EXPECT_EQ(seen.back().energy, a.report.energy_trace.back());
  for (std::size_t t = 0; t < a.frames.size(); ++t) {
    EXPECT_TRUE(bitwise_equal(a.frames[t].storage(), b.frames[t].storage()));
  }
  config.gamut_clamp = true;
  const Solution c = run_constrained(f0, f1, grid, config);
  for (const auto& frame : c.frames) {
    for (double v : frame.storage()) {
      EXPECT_GE(v, 0.0);
      EXPECT_LE(v, 1.0);
    }
  }
}

TEST(Engine, EarlyStop) {
  const GridSpec grid{{16}, 8};
  const auto f0 = signal(tk::random_vector(16, 15, 0.25, 1.0));
  SolverConfig config;
  config.stop_tolerance = 1e-6;
  const Solution s = run_constrained(f0, f0, grid, config);
  EXPECT_LT(s.report.iterations, 2000u);
  EXPECT_LE(s.report.dual_residual_trace.back(), 1e-6);
  EXPECT_EQ(s.report.energy_trace.size(), s.report.iterations);
}

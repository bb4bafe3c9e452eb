#pragma once

// Primal-dual iterations for the constrained and penalized transport models.
//
// With K(m, f) = (S_m m, S_f f) and scaled duals b = (b_u, b_v), one iteration is
//
//   1. x   <- Pi_C(x - tau sigma K^T bbar)                        (constrained)
//      x   <- (lambda A^T A + I/tau)^{-1} (lambda A^T f^- + (x - tau sigma K^T bbar)/tau)
//   2. (u, v) <- prox_{J_p/sigma}(S_m m + b_u, S_f f + f^+ + b_v)  cell by cell
//   3. b   <- b + (S_m m, S_f f + f^+) - (u, v)
//   4. bbar <- b + theta (b - b_old)
//
// The TV variant appends the block w = Dt f (spatial differences of every
// interior layer, normalized so that |Dt| <= 1) whose prox is soft thresholding.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "colorot/grid.hpp"
#include "colorot/linear_solvers.hpp"
#include "colorot/operators.hpp"
#include "colorot/prox.hpp"
#include "colorot/transforms.hpp"

namespace colorot {

enum class Model { Constrained, Penalized };
enum class TvMode { Anisotropic, Isotropic };

inline const char* to_string(Model model) noexcept {
  return model == Model::Constrained ? "constrained" : "penalized";
}

inline Model model_from_string(const std::string& name) {
  if (name == "constrained") return Model::Constrained;
  if (name == "penalized") return Model::Penalized;
  throw std::invalid_argument("unknown model '" + name + "' (expected constrained or penalized)");
}

/// Thrown for configurations the solver deliberately does not implement.
class UnsupportedFeature : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct SolverConfig {
  Model model = Model::Constrained;
  double lambda = 1.0;  // penalized model only
  double p = 2.0;
  double theta = 1.0;
  double sigma = 50.0;
  double tau = 0.99 / 50.0;
  std::size_t iterations = 2000;
  double tv_gamma = 0.0;
  TvMode tv_mode = TvMode::Anisotropic;
  bool gamut_clamp = false;
  /// Stop once the dual residual drops to this value; 0 runs all iterations.
  double stop_tolerance = 0.0;
  PenalizedMethod penalized_method = PenalizedMethod::Auto;
  /// Random dual initialization (uniform in [-1, 1]); zeros when empty.
  std::optional<std::uint64_t> dual_seed;

  void validate() const {
    if (!(sigma > 0.0) || !(tau > 0.0) || !std::isfinite(sigma) || !std::isfinite(tau)) {
      throw std::invalid_argument("sigma and tau must be positive");
    }
    if (!(sigma * tau < 1.0)) {
      throw std::invalid_argument("step sizes need sigma * tau < 1, got " +
                                  std::to_string(sigma * tau));
    }
    if (!(theta > 0.0 && theta <= 1.0)) {
      throw std::invalid_argument("theta must lie in (0, 1], got " + std::to_string(theta));
    }
    ProxParams{p, sigma}.validate();
    if (model == Model::Penalized && (!(lambda > 0.0) || !std::isfinite(lambda))) {
      throw std::invalid_argument("penalized model needs lambda > 0, got " +
                                  std::to_string(lambda));
    }
    if (!(tv_gamma >= 0.0) || !std::isfinite(tv_gamma)) {
      throw std::invalid_argument("tv_gamma must be nonnegative");
    }
    if (tv_mode == TvMode::Isotropic) {
      throw UnsupportedFeature("isotropic TV is not supported; use anisotropic TV");
    }
    if (iterations == 0) throw std::invalid_argument("iterations must be positive");
  }
};

struct IterationRecord {
  std::size_t iteration = 0;  // 1-based
  double energy = 0.0;
  double residual = 0.0;
  double dual_residual = 0.0;
};

using ProgressSink = std::function<void(const IterationRecord&)>;

struct Solution {
  /// P + 1 layers; frames[0] and frames[P] are f0 and f1 verbatim.
  std::vector<NdArray<double>> frames;
  FaceField momentum;
  CenterField density;
  RunReport report;
};

/// Normalized anisotropic spatial differences Dt = D / L of every interior
/// layer, with L = sqrt(sum_i N_i^2 max d_i) so that |Dt| <= 1. The colour
/// axis is not differenced.
class TvOperator {
 public:
  explicit TvOperator(const GridSpec& grid) : grid_(grid) {
    double norm2 = 0.0;
    std::size_t offset = 0;
    for (std::size_t axis = 0; axis < std::min<std::size_t>(grid.axes(), 2); ++axis) {
      const std::size_t n = grid.spatial_dims[axis];
      const bool periodic = grid.spatial_boundary == BoundaryKind::Periodic;
      const std::size_t diffs = periodic ? n : n - 1;
      if (diffs == 0) continue;
      const auto d = laplacian_eigs(periodic ? SpectrumKind::Periodic : SpectrumKind::Mirror, n);
      norm2 += static_cast<double>(n * n) * *std::max_element(d.begin(), d.end());
      Extents e = grid.interior_extents();
      e[axis] = diffs;
      axes_.push_back({axis, n, periodic, offset, e});
      offset += element_count(e);
    }
    size_ = offset;
    scale_ = norm2 > 0.0 ? 1.0 / std::sqrt(norm2) : 0.0;
    lipschitz_ = std::sqrt(norm2);
  }

  std::size_t size() const noexcept { return size_; }
  /// L, the norm of the unnormalized difference operator.
  double norm() const noexcept { return lipschitz_; }

  void apply(std::span<const double> f, std::span<double> out) const {
    for (const Axis& a : axes_) {
      const double w = static_cast<double>(a.n) * scale_;
      detail::for_each_line(a.extents, a.axis, [&](std::size_t o, std::size_t i, std::size_t s) {
        const std::size_t nd = a.extents[a.axis];
        const double* src = f.data() + o * a.n * s + i;
        double* dst = out.data() + a.offset + o * nd * s + i;
        for (std::size_t k = 0; k < nd; ++k) {
          dst[k * s] = w * (src[((k + 1) % a.n) * s] - src[k * s]);
        }
      });
    }
  }

  /// f += Dt^T w.
  void apply_adjoint_add(std::span<const double> wv, std::span<double> f) const {
    for (const Axis& a : axes_) {
      const double w = static_cast<double>(a.n) * scale_;
      detail::for_each_line(a.extents, a.axis, [&](std::size_t o, std::size_t i, std::size_t s) {
        const std::size_t nd = a.extents[a.axis];
        const double* src = wv.data() + a.offset + o * nd * s + i;
        double* dst = f.data() + o * a.n * s + i;
        for (std::size_t k = 0; k < nd; ++k) {
          dst[k * s] -= w * src[k * s];
          dst[((k + 1) % a.n) * s] += w * src[k * s];
        }
      });
    }
  }

 private:
  struct Axis {
    std::size_t axis, n;
    bool periodic;
    std::size_t offset;
    Extents extents;
  };
  GridSpec grid_;
  std::vector<Axis> axes_;
  std::size_t size_ = 0;
  double scale_ = 0.0;
  double lipschitz_ = 0.0;
};

/// Anisotropic spatial TV of one layer: sum over non-colour axes of
/// N_i |f(j+1) - f(j)| (periodic axes wrap around).
inline double spatial_tv(const NdArray<double>& layer, const GridSpec& grid) {
  check_extents(layer.extents(), grid.layer_extents(), "spatial_tv layer");
  double total = 0.0;
  for (std::size_t axis = 0; axis < std::min<std::size_t>(grid.axes(), 2); ++axis) {
    const std::size_t n = grid.spatial_dims[axis];
    const bool periodic = grid.spatial_boundary == BoundaryKind::Periodic;
    const std::size_t nd = periodic ? n : n - 1;
    detail::for_each_line(grid.layer_extents(), axis,
                          [&](std::size_t o, std::size_t i, std::size_t s) {
      const double* src = layer.storage().data() + o * n * s + i;
      for (std::size_t k = 0; k < nd; ++k) {
        total += static_cast<double>(n) * std::abs(src[((k + 1) % n) * s] - src[k * s]);
      }
    });
  }
  return total;
}

/// sum over midpoint cells of J_p(S_m m, S_f f + f^+).
inline double energy(std::span<const double> x, const OperatorSet& ops, double p) {
  const std::size_t nm = ops.sizes().m_total;
  std::vector<double> u(ops.grid().axes() * ops.midpoint_size()), v(ops.midpoint_size());
  ops.apply_Sm(x.first(nm), u);
  ops.apply_Sf_plus(x.subspan(nm), v);
  return sum_Jp(u, v, p);
}

inline double energy(const FaceField& m, const CenterField& f, const OperatorSet& ops, double p) {
  std::vector<double> x = flatten(m, ops.grid());
  const auto fv = flatten(f, ops.grid());
  x.insert(x.end(), fv.begin(), fv.end());
  return energy(x, ops, p);
}

/// ||A(m, f) - f^-||_2.
inline double residual(const FaceField& m, const CenterField& f, const OperatorSet& ops) {
  std::vector<double> x = flatten(m, ops.grid());
  const auto fv = flatten(f, ops.grid());
  x.insert(x.end(), fv.begin(), fv.end());
  return ops.residual(x);
}

namespace detail {

inline void check_density(const NdArray<double>& f, const GridSpec& grid, const char* what) {
  check_extents(f.extents(), grid.layer_extents(), what);
  for (double v : f.storage()) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(std::string(what) + " must be finite and nonnegative");
    }
  }
}

inline double max_delta_norm(std::span<const double> now, std::span<const double> before) {
  double sum = 0.0;
  for (std::size_t i = 0; i < now.size(); ++i) {
    const double d = now[i] - before[i];
    sum += d * d;
  }
  return std::sqrt(sum);
}

}  // namespace detail

/// One transport problem: grid, endpoints and configuration. run() may be
/// called repeatedly and always starts from the configured initialization.
class TransportSolver {
 public:
  TransportSolver(GridSpec grid, NdArray<double> f0, NdArray<double> f1, SolverConfig config,
                  bool with_tv = false)
      : config_(std::move(config)), with_tv_(with_tv || config_.tv_gamma > 0.0) {
    config_.validate();
    grid.validate();
    detail::check_density(f0, grid, "f0");
    detail::check_density(f1, grid, "f1");
    ops_.emplace(std::move(grid), std::move(f0), std::move(f1));
    if (config_.model == Model::Constrained) {
      projection_.emplace(*ops_);
    } else {
      penalized_.emplace(*ops_, config_.lambda, config_.tau, config_.penalized_method);
    }
    if (with_tv_) tv_.emplace(ops_->grid());
  }

  TransportSolver(const TransportSolver&) = delete;
  TransportSolver& operator=(const TransportSolver&) = delete;

  const OperatorSet& operators() const { return *ops_; }
  const SolverConfig& config() const noexcept { return config_; }

  /// Effective dual step: sigma, halved when the TV block is present so that
  /// sigma tau |K|^2 < 1 still holds with |K|^2 <= 2.
  double dual_step() const noexcept {
    return with_tv_ && config_.tv_gamma > 0.0 ? 0.5 * config_.sigma : config_.sigma;
  }

  Solution run(const ProgressSink& sink = {}) {
    const auto start = std::chrono::steady_clock::now();
    const OperatorSet& ops = *ops_;
    const GridSpec& grid = ops.grid();
    const FieldSizes& sizes = ops.sizes();
    const std::size_t nm = sizes.m_total, n = sizes.total();
    const std::size_t M = ops.midpoint_size();
    const std::size_t nu = grid.axes() * M;
    const std::size_t nw = with_tv_ ? tv_->size() : 0;
    const double sigma = dual_step();
    const double tau = config_.tau;
    const double theta = config_.theta;
    const ProxParams prox{config_.p, sigma};
    const double threshold = with_tv_ ? config_.tv_gamma * tv_->norm() / sigma : 0.0;

    std::vector<double> x(n, 0.0), a(n), grad_m(nm), grad_f(sizes.f_total);
    std::vector<double> bu(nu, 0.0), bv(M, 0.0), bw(nw, 0.0);
    if (config_.dual_seed) {
      std::mt19937_64 rng(*config_.dual_seed);
      std::uniform_real_distribution<double> dist(-1.0, 1.0);
      for (double& b : bu) b = dist(rng);
      for (double& b : bv) b = dist(rng);
      for (double& b : bw) b = dist(rng);
    }
    std::vector<double> bu_bar = bu, bv_bar = bv, bw_bar = bw;
    std::vector<double> bu_old(nu), bv_old(M), bw_old(nw);
    std::vector<double> u(nu), v(M), w(nw), su(nu), sv(M), dw(nw), scratch(M);
    std::vector<double> rhs_base;
    if (penalized_) {
      std::vector<double> fm(ops.f_minus());
      rhs_base = ops.apply_A_adjoint(fm);
      for (double& r : rhs_base) r *= config_.lambda;
    }

    Solution solution;
    RunReport& report = solution.report;
    for (std::size_t it = 1; it <= config_.iterations; ++it) {
      // 1. primal step
      ops.apply_Sm_adjoint(bu_bar, grad_m);
      ops.apply_Sf_adjoint(bv_bar, grad_f);
      if (with_tv_) tv_->apply_adjoint_add(bw_bar, grad_f);
      const double ts = tau * sigma;
      for (std::size_t i = 0; i < nm; ++i) a[i] = x[i] - ts * grad_m[i];
      for (std::size_t i = 0; i < sizes.f_total; ++i) a[nm + i] = x[nm + i] - ts * grad_f[i];
      if (projection_) {
        x = a;
        projection_->project(x, scratch);
      } else {
        for (std::size_t i = 0; i < n; ++i) a[i] = rhs_base[i] + a[i] / tau;
        penalized_->solve(a, x);
      }

      // 2. prox of J_p (and of the TV term)
      std::span<const double> xm(x.data(), nm), xf(x.data() + nm, sizes.f_total);
      ops.apply_Sm(xm, su);
      ops.apply_Sf_plus(xf, sv);
      report.energy_trace.push_back(sum_Jp(su, sv, config_.p));
      for (std::size_t i = 0; i < nu; ++i) u[i] = su[i] + bu[i];
      for (std::size_t i = 0; i < M; ++i) v[i] = sv[i] + bv[i];
      prox_cells(u, v, prox);
      if (with_tv_) {
        tv_->apply(xf, dw);
        double tv_sum = 0.0;
        for (std::size_t i = 0; i < nw; ++i) {
          tv_sum += std::abs(dw[i]);
          const double t = dw[i] + bw[i];
          w[i] = std::copysign(std::max(std::abs(t) - threshold, 0.0), t);
        }
        report.energy_trace.back() += config_.tv_gamma * tv_->norm() * tv_sum;
      }

      // 3. dual update, 4. extrapolation
      bu_old.swap(bu);
      bv_old.swap(bv);
      for (std::size_t i = 0; i < nu; ++i) bu[i] = bu_old[i] + su[i] - u[i];
      for (std::size_t i = 0; i < M; ++i) bv[i] = bv_old[i] + sv[i] - v[i];
      for (std::size_t i = 0; i < nu; ++i) bu_bar[i] = bu[i] + theta * (bu[i] - bu_old[i]);
      for (std::size_t i = 0; i < M; ++i) bv_bar[i] = bv[i] + theta * (bv[i] - bv_old[i]);
      if (with_tv_) {
        bw_old.swap(bw);
        for (std::size_t i = 0; i < nw; ++i) bw[i] = (bw_old[i] + dw[i]) - w[i];
        for (std::size_t i = 0; i < nw; ++i) bw_bar[i] = bw[i] + theta * (bw[i] - bw_old[i]);
      }

      const double dual = std::max(detail::max_delta_norm(bu, bu_old),
                                   detail::max_delta_norm(bv, bv_old));
      report.residual_trace.push_back(ops.residual(x));
      report.dual_residual_trace.push_back(dual);
      report.iterations = it;
      if (sink) {
        sink({it, report.energy_trace.back(), report.residual_trace.back(), dual});
      }
      if (config_.stop_tolerance > 0.0 && dual <= config_.stop_tolerance) break;
    }

    const std::span<const double> xm(x.data(), nm), xf(x.data() + nm, sizes.f_total);
    solution.momentum = unflatten_faces(xm, grid);
    solution.density = unflatten_centers(xf, grid, ops.f0(), ops.f1());
    const std::size_t cells = grid.cells();
    solution.frames.push_back(ops.f0());
    for (std::size_t t = 0; t + 1 < grid.time_steps; ++t) {
      std::vector<double> layer(xf.begin() + static_cast<std::ptrdiff_t>(t * cells),
                                xf.begin() + static_cast<std::ptrdiff_t>((t + 1) * cells));
      if (config_.gamut_clamp) {
        for (double& value : layer) value = std::clamp(value, 0.0, 1.0);
      }
      solution.frames.emplace_back(grid.layer_extents(), std::move(layer));
    }
    solution.frames.push_back(ops.f1());
    report.wall_time =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return solution;
  }

 private:
  SolverConfig config_;
  bool with_tv_;
  std::optional<OperatorSet> ops_;
  std::optional<ProjectionPlan> projection_;
  std::optional<PenalizedSolver> penalized_;
  std::optional<TvOperator> tv_;
};

/// Algorithm 1 for the constrained model.
inline Solution run_constrained(const NdArray<double>& f0, const NdArray<double>& f1,
                                const GridSpec& grid, SolverConfig config,
                                const ProgressSink& sink = {}) {
  config.model = Model::Constrained;
  config.tv_gamma = 0.0;
  return TransportSolver(grid, f0, f1, config).run(sink);
}

/// Algorithm 2 for the penalized model; config.lambda must be positive.
inline Solution run_penalized(const NdArray<double>& f0, const NdArray<double>& f1,
                              const GridSpec& grid, SolverConfig config,
                              const ProgressSink& sink = {}) {
  config.model = Model::Penalized;
  config.tv_gamma = 0.0;
  return TransportSolver(grid, f0, f1, config).run(sink);
}

/// Either model with the anisotropic TV term gamma TV(f) added. gamma = 0
/// runs the same iterations as the plain model.
inline Solution run_with_tv(const NdArray<double>& f0, const NdArray<double>& f1,
                            const GridSpec& grid, const SolverConfig& config,
                            const ProgressSink& sink = {}) {
  return TransportSolver(grid, f0, f1, config, true).run(sink);
}

/// Dispatches on config.model and config.tv_gamma.
inline Solution solve(const NdArray<double>& f0, const NdArray<double>& f1,
                      const GridSpec& grid, const SolverConfig& config,
                      const ProgressSink& sink = {}) {
  return TransportSolver(grid, f0, f1, config).run(sink);
}

}  // namespace colorot

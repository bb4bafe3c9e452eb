#pragma once

// Linear algebra of the primal step:
//
//   ProjectionPlan   Pi_C(a) = a - A^T (A A^T)^+ (A a - f^-)
//   SchurPlan        (lambda A^T A + I/tau)^{-1} by block elimination (1D grids)
//   PenalizedSolver  the same system on any grid: Schur, the Woodbury identity
//                    or preconditioned CG
//
// A A^T is diagonalized by DCT-II along time and mirror axes and by the DFT
// along periodic axes. Plans keep a pointer to their OperatorSet, which must
// outlive them.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "colorot/grid.hpp"
#include "colorot/operators.hpp"
#include "colorot/transforms.hpp"

namespace colorot {

namespace detail {

inline TransformKind cell_transform(BoundaryKind kind) {
  return kind == BoundaryKind::Periodic ? TransformKind::Dft : TransformKind::DctII;
}

inline double dot(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) sum += a[i] * b[i];
  return sum;
}

inline double norm(std::span<const double> a) { return std::sqrt(dot(a, a)); }

inline void check_positive(double value, const char* name) {
  if (!(value > 0.0) || !std::isfinite(value)) {
    throw std::invalid_argument(std::string(name) + " must be positive and finite, got " +
                                std::to_string(value));
  }
}

}  // namespace detail

/// Spectral calculus of A A^T on the midpoint grid (cells x P). Eigenvalues
/// are sum_i N_i^2 d_i + P^2 d^mirr_P, one per coefficient.
class MidpointSpectrum {
 public:
  explicit MidpointSpectrum(const GridSpec& grid) {
    std::vector<TransformKind> kinds;
    for (std::size_t axis = 0; axis < grid.axes(); ++axis) {
      kinds.push_back(detail::cell_transform(grid.boundary(axis)));
      weights_.push_back(static_cast<double>(grid.spatial_dims[axis]) *
                         static_cast<double>(grid.spatial_dims[axis]));
    }
    kinds.push_back(TransformKind::DctII);
    const double P = static_cast<double>(grid.time_steps);
    weights_.push_back(P * P);
    plan_ = SpectralPlan(grid.midpoint_extents(), std::move(kinds));
  }

  const SpectralPlan& plan() const noexcept { return plan_; }

  /// Symbol of g(A A^T).
  template <class Fn>
  std::vector<double> symbol(Fn&& g) const {
    return plan_.make_symbol([&](std::span<const double> eigs) {
      double d = 0.0;
      for (std::size_t a = 0; a < eigs.size(); ++a) d += weights_[a] * eigs[a];
      return g(d);
    });
  }

  /// All eigenvalues of A A^T in coefficient order.
  std::vector<double> eigenvalues() const {
    std::vector<double> d = symbol([](double v) { return v; });
    for (double& v : d) v *= plan_.normalization();
    return d;
  }

 private:
  SpectralPlan plan_;
  std::vector<double> weights_;
};

/// Pseudo-inverse of A A^T and the projection onto the affine set
/// C = {x : A^T A x = A^T f^-}.
class ProjectionPlan {
 public:
  /// Eigenvalues with |d| <= kZeroThreshold * max d count as zero.
  static constexpr double kZeroThreshold = 1e-12;

  explicit ProjectionPlan(const OperatorSet& ops) : ops_(&ops), spectrum_(ops.grid()) {
    std::vector<double> d = spectrum_.eigenvalues();
    double dmax = 0.0;
    for (double v : d) dmax = std::max(dmax, std::abs(v));
    const double cut = kZeroThreshold * dmax;
    zero_modes_ = 0;
    for (double v : d) zero_modes_ += std::abs(v) <= cut ? 1 : 0;
    pinv_ = spectrum_.symbol([cut](double v) { return std::abs(v) <= cut ? 0.0 : 1.0 / v; });
  }

  const OperatorSet& operators() const noexcept { return *ops_; }

  /// Number of eigenvalues treated as zero (1 for every valid grid).
  std::size_t zero_modes() const noexcept { return zero_modes_; }

  /// y <- (A A^T)^+ y, in place.
  void apply_pseudo_inverse(std::span<double> y) const { spectrum_.plan().apply(y, pinv_); }

  /// x <- Pi_C(x), in place. `scratch` must hold midpoint_size() values.
  void project(std::span<double> x, std::span<double> scratch) const {
    const OperatorSet& ops = *ops_;
    detail::check_length(x, ops.sizes().total(), "project input");
    detail::check_length(scratch, ops.midpoint_size(), "project scratch");
    ops.apply_A(x, scratch);
    const auto& fm = ops.f_minus();
    for (std::size_t i = 0; i < scratch.size(); ++i) scratch[i] -= fm[i];
    apply_pseudo_inverse(scratch);
    std::vector<double> correction = ops.apply_A_adjoint(scratch);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] -= correction[i];
  }

  std::vector<double> project(std::span<const double> a) const {
    std::vector<double> x(a.begin(), a.end());
    std::vector<double> scratch(ops_->midpoint_size());
    project(x, scratch);
    return x;
  }

 private:
  const OperatorSet* ops_;
  MidpointSpectrum spectrum_;
  std::vector<double> pinv_;
  std::size_t zero_modes_ = 0;
};

/// Pi_C applied to a typed (m, f) pair.
inline std::pair<FaceField, CenterField> project_onto_C(const FaceField& m,
                                                        const CenterField& f,
                                                        const ProjectionPlan& plan) {
  const OperatorSet& ops = plan.operators();
  const GridSpec& grid = ops.grid();
  if (!(f.f0 == ops.f0()) || !(f.f1 == ops.f1())) {
    throw std::invalid_argument("project_onto_C: endpoints differ from the plan's problem");
  }
  std::vector<double> x = flatten(m, grid);
  std::vector<double> fv = flatten(f, grid);
  x.insert(x.end(), fv.begin(), fv.end());
  x = plan.project(x);
  const std::size_t nm = ops.sizes().m_total;
  return {unflatten_faces(std::span<const double>(x).first(nm), grid),
          unflatten_centers(std::span<const double>(x).subspan(nm), grid, f.f0, f.f1)};
}

/// Closed-form inverse of M = lambda A^T A + I/tau on 1D grids:
///
///   M = [X Y; Y^T Z],  X = lambda D_m^T D_m + I/tau,  Y = lambda D_m^T D_f,
///   S = Z - Y^T X^{-1} Y  with eigenvalues  lambda P^2 dz_k / (1 + tau lambda N^2 d_j) + 1/tau.
///
/// X is diagonalized on faces by DST-I (mirror) or the DFT (periodic); S by
/// DST-I in time and DCT-II or the DFT in space.
class SchurPlan {
 public:
  SchurPlan(const OperatorSet& ops, double lambda, double tau)
      : ops_(&ops), lambda_(lambda), tau_(tau) {
    detail::check_positive(lambda, "lambda");
    detail::check_positive(tau, "tau");
    const GridSpec& grid = ops.grid();
    if (grid.axes() != 1) {
      throw std::invalid_argument("SchurPlan: closed-form inverse needs a 1D grid, got " +
                                  std::to_string(grid.axes()) + " spatial axes");
    }
    const bool periodic = grid.spatial_boundary == BoundaryKind::Periodic;
    const double N = static_cast<double>(grid.spatial_dims[0]);
    const double P = static_cast<double>(grid.time_steps);

    x_plan_ = SpectralPlan(grid.face_extents(0),
                           {periodic ? TransformKind::Dft : TransformKind::DstI,
                            TransformKind::Identity});
    x_inv_ = x_plan_.make_symbol([&](std::span<const double> e) {
      return 1.0 / (lambda * N * N * e[0] + 1.0 / tau);
    });

    s_plan_ = SpectralPlan(grid.interior_extents(),
                           {periodic ? TransformKind::Dft : TransformKind::DctII,
                            TransformKind::DstI});
    s_inv_ = s_plan_.make_symbol([&](std::span<const double> e) {
      const double s = lambda * P * P * e[1] / (1.0 + tau * lambda * N * N * e[0]) + 1.0 / tau;
      return 1.0 / s;
    });
  }

  double lambda() const noexcept { return lambda_; }
  double tau() const noexcept { return tau_; }
  const OperatorSet& operators() const noexcept { return *ops_; }

  /// x = M^{-1} rhs.
  void solve(std::span<const double> rhs, std::span<double> x) const {
    const OperatorSet& ops = *ops_;
    const std::size_t nm = ops.sizes().m_total;
    detail::check_length(rhs, ops.sizes().total(), "SchurPlan::solve rhs");
    detail::check_length(x, ops.sizes().total(), "SchurPlan::solve output");
    std::span<double> xm = x.first(nm), xf = x.subspan(nm);
    std::vector<double> mid(ops.midpoint_size());

    // t_m = X^{-1} r_m
    std::vector<double> tm(rhs.begin(), rhs.begin() + static_cast<std::ptrdiff_t>(nm));
    x_plan_.apply(tm, x_inv_);
    // t_f = r_f - Y^T t_m,  x_f = S^{-1} t_f
    ops.apply_Dm(tm, mid);
    ops.apply_Df_adjoint(mid, xf);
    for (std::size_t i = 0; i < xf.size(); ++i) xf[i] = rhs[nm + i] - lambda_ * xf[i];
    s_plan_.apply(xf, s_inv_);
    // x_m = X^{-1} (r_m - Y x_f)
    ops.apply_Df(xf, mid);
    ops.apply_Dm_adjoint(mid, xm);
    for (std::size_t i = 0; i < nm; ++i) xm[i] = rhs[i] - lambda_ * xm[i];
    x_plan_.apply(xm, x_inv_);
  }

  std::vector<double> solve(std::span<const double> rhs) const {
    std::vector<double> x(rhs.size());
    solve(rhs, x);
    return x;
  }

 private:
  const OperatorSet* ops_;
  double lambda_, tau_;
  SpectralPlan x_plan_, s_plan_;
  std::vector<double> x_inv_, s_inv_;
};

/// x = (lambda A^T A + I/tau)^{-1} rhs with the Schur factorization.
inline std::vector<double> solve_penalized_step(std::span<const double> rhs,
                                                const SchurPlan& plan) {
  return plan.solve(rhs);
}

enum class PenalizedMethod { Auto, Schur, Woodbury, ConjugateGradient };

inline const char* to_string(PenalizedMethod method) noexcept {
  switch (method) {
    case PenalizedMethod::Auto: return "auto";
    case PenalizedMethod::Schur: return "schur";
    case PenalizedMethod::Woodbury: return "woodbury";
    case PenalizedMethod::ConjugateGradient: return "cg";
  }
  return "auto";
}

inline PenalizedMethod penalized_method_from_string(const std::string& name) {
  if (name == "auto") return PenalizedMethod::Auto;
  if (name == "schur") return PenalizedMethod::Schur;
  if (name == "woodbury") return PenalizedMethod::Woodbury;
  if (name == "cg") return PenalizedMethod::ConjugateGradient;
  throw std::invalid_argument("unknown penalized method '" + name + "' (expected auto, schur, woodbury or cg)");
}

struct CgSettings {
  double tolerance = 1e-12;  // relative residual
  std::size_t max_iterations = 60;
};

/// Solver for (lambda A^T A + I/tau) x = rhs on any grid. The Woodbury identity
/// gives the inverse tau (I - lambda tau A^T (I + lambda tau A A^T)^{-1} A),
/// evaluated with the spectral calculus of A A^T; CG uses it as preconditioner.
/// Auto picks Schur on 1D grids and Woodbury otherwise.
class PenalizedSolver {
 public:
  PenalizedSolver(const OperatorSet& ops, double lambda, double tau,
                  PenalizedMethod method = PenalizedMethod::Auto, CgSettings cg = {})
      : ops_(&ops), lambda_(lambda), tau_(tau), cg_(cg), spectrum_(ops.grid()) {
    detail::check_positive(lambda, "lambda");
    detail::check_positive(tau, "tau");
    if (method == PenalizedMethod::Auto) {
      method = ops.grid().axes() == 1 ? PenalizedMethod::Schur : PenalizedMethod::Woodbury;
    }
    method_ = method;
    if (method_ == PenalizedMethod::Schur) schur_.emplace(ops, lambda, tau);
    const double lt = lambda * tau;
    inner_ = spectrum_.symbol([lt](double d) { return 1.0 / (1.0 + lt * d); });
  }

  PenalizedMethod method() const noexcept { return method_; }

  /// CG iterations used by the last solve (0 for the closed form).
  std::size_t last_iterations() const noexcept { return last_iterations_; }
  double last_relative_residual() const noexcept { return last_residual_; }

  /// Solves in place; on entry x holds the initial guess (used by CG only).
  void solve(std::span<const double> rhs, std::span<double> x) {
    detail::check_length(rhs, ops_->sizes().total(), "PenalizedSolver rhs");
    detail::check_length(x, ops_->sizes().total(), "PenalizedSolver output");
    if (schur_) {
      schur_->solve(rhs, x);
      last_iterations_ = 0;
      last_residual_ = 0.0;
      return;
    }
    if (method_ == PenalizedMethod::Woodbury) {
      apply_preconditioner(rhs, x);
      last_iterations_ = 0;
      last_residual_ = 0.0;
      return;
    }
    conjugate_gradient(rhs, x);
  }

  /// y = (lambda A^T A + I/tau) x.
  void apply_operator(std::span<const double> x, std::span<double> y) const {
    std::vector<double> ax = ops_->apply_A(x);
    ops_->apply_A_adjoint(ax, y);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = lambda_ * y[i] + x[i] / tau_;
  }

  /// z = preconditioner(r); exact inverse up to rounding.
  void apply_preconditioner(std::span<const double> r, std::span<double> z) const {
    std::vector<double> ar = ops_->apply_A(r);
    spectrum_.plan().apply(ar, inner_);
    ops_->apply_A_adjoint(ar, z);
    const double lt = lambda_ * tau_;
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = tau_ * (r[i] - lt * z[i]);
  }

 private:
  void conjugate_gradient(std::span<const double> b, std::span<double> x) {
    const std::size_t n = b.size();
    std::vector<double> r(n), z(n), p(n), q(n);
    apply_operator(x, q);
    for (std::size_t i = 0; i < n; ++i) r[i] = b[i] - q[i];
    const double bnorm = std::max(detail::norm(b), 1e-300);
    double rnorm = detail::norm(r);
    last_iterations_ = 0;
    if (rnorm <= cg_.tolerance * bnorm) {
      last_residual_ = rnorm / bnorm;
      return;
    }
    apply_preconditioner(r, z);
    p = z;
    double rz = detail::dot(r, z);
    for (std::size_t it = 1; it <= cg_.max_iterations; ++it) {
      apply_operator(p, q);
      const double alpha = rz / detail::dot(p, q);
      for (std::size_t i = 0; i < n; ++i) {
        x[i] += alpha * p[i];
        r[i] -= alpha * q[i];
      }
      last_iterations_ = it;
      rnorm = detail::norm(r);
      if (rnorm <= cg_.tolerance * bnorm) break;
      apply_preconditioner(r, z);
      const double rz_next = detail::dot(r, z);
      const double beta = rz_next / rz;
      rz = rz_next;
      for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
    }
    last_residual_ = rnorm / bnorm;
  }

  const OperatorSet* ops_;
  double lambda_, tau_;
  CgSettings cg_;
  PenalizedMethod method_ = PenalizedMethod::Auto;
  std::optional<SchurPlan> schur_;
  MidpointSpectrum spectrum_;
  std::vector<double> inner_;
  std::size_t last_iterations_ = 0;
  double last_residual_ = 0.0;
};

}  // namespace colorot

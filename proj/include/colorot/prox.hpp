#pragma once

// Perspective energy J_p(x, y) = |x|^p / (p y^{p-1}) and its proximal map.
//
// prox_{J_p/sigma}(x*, y*) follows from Moreau's identity and the projection
// of (sigma x*, sigma y*) onto K_p = {(a, b) : |a|^q / q + b <= 0}. Outside
// K_p the projection reduces to the scalar root of
//
//   phi(z) = z (1 + h(z)) - sigma |x*|,   h(z) = (sigma y* + z^q / q) z^{q-2},
//
// which is increasing and convex on [z_s, inf), z_s = max(0, -q sigma y*)^{1/q}.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>

namespace colorot {

struct ProxParams {
  double p = 2.0;
  double sigma = 1.0;

  /// Conjugate exponent p / (p - 1).
  double q() const noexcept { return p / (p - 1.0); }

  void validate() const {
    if (!(p > 1.0 && p <= 2.0)) {
      throw std::invalid_argument("p must lie in (1, 2], got " + std::to_string(p));
    }
    if (!(sigma > 0.0) || !std::isfinite(sigma)) {
      throw std::invalid_argument("prox sigma must be positive, got " + std::to_string(sigma));
    }
  }
};

inline double euclidean_norm(std::span<const double> x) noexcept {
  double sum = 0.0;
  for (double v : x) sum += v * v;
  return std::sqrt(sum);
}

/// J_p(x, y): |x|^p / (p y^{p-1}) for y > 0, 0 at the origin, +inf otherwise.
inline double eval_Jp(std::span<const double> x, double y, double p) noexcept {
  const double r = euclidean_norm(x);
  if (y > 0.0) {
    if (p == 2.0) return 0.5 * r * r / y;
    return std::pow(r, p) / (p * std::pow(y, p - 1.0));
  }
  if (y == 0.0 && r == 0.0) return 0.0;
  return std::numeric_limits<double>::infinity();
}

inline double eval_Jp(double x, double y, double p) noexcept {
  return eval_Jp(std::span<const double>(&x, 1), y, p);
}

/// (a, b) in K_p, i.e. |a|^q / q + b <= 0.
inline bool in_Kp(std::span<const double> a, double b, double q) noexcept {
  const double r = euclidean_norm(a);
  const double rq = q == 2.0 ? r * r : std::pow(r, q);
  return rq / q + b <= 0.0;
}

/// The scalar equation phi(z) = 0 with a = sigma y*, s = sigma |x*|.
struct RootProblem {
  double a = 0.0;
  double s = 0.0;
  double q = 2.0;

  double phi(double z) const noexcept {
    if (q == 2.0) return z + a * z + 0.5 * z * z * z - s;
    const double zq1 = std::pow(z, q - 1.0);
    return z + a * zq1 + zq1 * zq1 * z / q - s;
  }

  double dphi(double z) const noexcept {
    if (q == 2.0) return 1.0 + a + 1.5 * z * z;
    const double zq2 = std::pow(z, q - 2.0);
    const double zq1 = zq2 * z;
    return 1.0 + a * (q - 1.0) * zq2 + (2.0 * q - 1.0) / q * zq1 * zq1;
  }

  /// Left end of the convexity region, max(0, -q a)^{1/q}.
  double lower_bound() const noexcept {
    const double t = std::max(0.0, -q * a);
    return q == 2.0 ? std::sqrt(t) : std::pow(t, 1.0 / q);
  }

  /// Stopping tolerance at z: 1e-13 (1 + s), raised to the rounding floor of
  /// evaluating phi when its terms are much larger than s.
  double tolerance(double z = 0.0) const noexcept {
    const double zq1 = q == 2.0 ? z : std::pow(z, q - 1.0);
    const double terms = z + std::abs(a) * zq1 + zq1 * zq1 * z / q + s;
    return std::max(1e-13 * (1.0 + s), 4.0 * std::numeric_limits<double>::epsilon() * terms);
  }
};

struct RootResult {
  double z = 0.0;
  std::size_t iterations = 0;
  bool bisected = false;
};

/// Bisection on [lo, hi]; hi doubles until phi(hi) > 0.
inline RootResult bisect_root(const RootProblem& problem, double lo) {
  double hi = std::max(2.0 * lo, 1.0);
  while (problem.phi(hi) <= 0.0) hi *= 2.0;
  RootResult result;
  result.bisected = true;
  for (int it = 0; it < 200 && hi - lo > 0.0; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    const double value = problem.phi(mid);
    if (std::abs(value) <= problem.tolerance(mid)) {
      lo = hi = mid;
      break;
    }
    (value < 0.0 ? lo : hi) = mid;
  }
  result.z = 0.5 * (lo + hi);
  return result;
}

inline constexpr std::size_t kMaxNewtonIterations = 40;

/// Newton's method from `start` (>= problem.lower_bound()); stops once
/// |phi| <= problem.tolerance(z) and falls back to bisection after 40 steps or on a
/// non-finite iterate.
inline RootResult newton_root(const RootProblem& problem, double start) {
  const double lo = problem.lower_bound();
  double z = std::max(start, lo);
  RootResult result;
  for (std::size_t it = 0; it <= kMaxNewtonIterations; ++it) {
    const double value = problem.phi(z);
    if (!std::isfinite(value)) break;
    if (std::abs(value) <= problem.tolerance(z)) {
      result.z = z;
      result.iterations = it;
      return result;
    }
    if (it == kMaxNewtonIterations) break;
    const double slope = problem.dphi(z);
    const double next = z - value / slope;
    if (!std::isfinite(next)) break;
    if (next == z) {
      result.z = z;
      result.iterations = it + 1;
      return result;
    }
    z = std::max(next, lo);
  }
  RootResult fallback = bisect_root(problem, lo);
  fallback.iterations = kMaxNewtonIterations;
  return fallback;
}

/// Newton start used by prox_Jp: the smaller of s and (q s)^{1/(2q-1)} (both
/// bound the root from above when phi is increasing), kept inside the
/// convexity region.
inline double newton_start(const RootProblem& problem) noexcept {
  const double lo = problem.lower_bound();
  const double cap = problem.q == 2.0 ? std::cbrt(2.0 * problem.s)
                                      : std::pow(problem.q * problem.s, 1.0 / (2.0 * problem.q - 1.0));
  return std::max(lo, std::min(problem.s, cap));
}

/// prox_{J_p/sigma}(x*, y*). Writes x-hat into `x_out` (may alias x_star) and
/// returns y-hat. Optionally reports the Newton iteration count.
inline double prox_Jp(std::span<const double> x_star, double y_star, const ProxParams& params,
                      std::span<double> x_out, std::size_t* iterations = nullptr) {
  const double q = params.q();
  const double sigma = params.sigma;
  const double r = euclidean_norm(x_star);
  const double sr = sigma * r;
  const double srq = q == 2.0 ? sr * sr : std::pow(sr, q);
  if (iterations) *iterations = 0;
  if (srq / q + sigma * y_star <= 0.0) {
    for (double& v : x_out) v = 0.0;
    return 0.0;
  }
  const RootProblem problem{sigma * y_star, sr, q};
  const RootResult root = newton_root(problem, newton_start(problem));
  if (iterations) *iterations = root.iterations;
  const double z = root.z;
  const double zq = q == 2.0 ? z * z : std::pow(z, q);
  const double zq2 = q == 2.0 ? 1.0 : std::pow(z, q - 2.0);
  const double h = (sigma * y_star + zq / q) * zq2;
  const double factor = h / (1.0 + h);
  for (std::size_t i = 0; i < x_out.size(); ++i) x_out[i] = x_star[i] * factor;
  return std::max(0.0, y_star + zq / (sigma * q));
}

/// Scalar convenience form (d = 1); returns (x-hat, y-hat).
inline std::pair<double, double> prox_Jp(double x_star, double y_star, const ProxParams& params) {
  double x = x_star;
  const double y = prox_Jp(std::span<const double>(&x_star, 1), y_star, params,
                           std::span<double>(&x, 1));
  return {x, y};
}

/// Applies prox_Jp to every cell of a midpoint grid in place. `u` holds d
/// momentum blocks of `cells` entries each (component k of cell c at
/// u[k * cells + c]); `v` holds the densities.
inline void prox_cells(std::span<double> u, std::span<double> v, const ProxParams& params) {
  const std::size_t cells = v.size();
  if (cells == 0) return;
  const std::size_t d = u.size() / cells;
  if (d * cells != u.size() || d == 0 || d > 8) {
    throw std::invalid_argument("prox_cells: momentum size is not a multiple of the cell count");
  }
  double x[8];
  for (std::size_t c = 0; c < cells; ++c) {
    for (std::size_t k = 0; k < d; ++k) x[k] = u[k * cells + c];
    v[c] = prox_Jp(std::span<const double>(x, d), v[c], params, std::span<double>(x, d));
    for (std::size_t k = 0; k < d; ++k) u[k * cells + c] = x[k];
  }
}

/// sum over cells of J_p(u_c, v_c), with the layout of prox_cells.
inline double sum_Jp(std::span<const double> u, std::span<const double> v, double p) {
  const std::size_t cells = v.size();
  if (cells == 0) return 0.0;
  const std::size_t d = u.size() / cells;
  if (d * cells != u.size() || d > 8) {
    throw std::invalid_argument("sum_Jp: momentum size is not a multiple of the cell count");
  }
  double x[8];
  double total = 0.0;
  for (std::size_t c = 0; c < cells; ++c) {
    for (std::size_t k = 0; k < d; ++k) x[k] = u[k * cells + c];
    total += eval_Jp(std::span<const double>(x, d), v[c], p);
  }
  return total;
}

}  // namespace colorot

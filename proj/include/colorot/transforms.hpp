#pragma once

// Orthogonal trigonometric transforms and the eigenvalues of the 1D
// second-difference matrices they diagonalize:
//
//   C_n      = sqrt(2/n) (eps_j cos(j(2k+1)pi/2n))_{j,k=0}^{n-1},  eps_0 = 1/sqrt(2)
//   S_{n-1}  = sqrt(2/n) (sin(jk pi/n))_{j,k=1}^{n-1}
//   F_n      = n^{-1/2} (exp(-2 pi i jk/n))_{j,k=0}^{n-1}
//
// The dense matrices are the definition; FFTW provides the O(n log n) route.

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <memory>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <vector>

#include <fftw3.h>

#include "colorot/grid.hpp"

namespace colorot {

enum class SpectrumKind { Zero, Mirror, Periodic };

/// Eigenvalues of the normalized 1D Laplacians.
///   Zero:     d^zero_{n-1} = (4 sin^2(k pi / 2n))_{k=1}^{n-1}   (n >= 2)
///   Mirror:   d^mirr_n     = (4 sin^2(j pi / 2n))_{j=0}^{n-1}
///   Periodic: d^per_n      = (4 sin^2(k pi / n))_{k=0}^{n-1}
inline std::vector<double> laplacian_eigs(SpectrumKind kind, std::size_t n) {
  using std::numbers::pi;
  auto sin2 = [](double angle) {
    const double s = std::sin(angle);
    return 4.0 * s * s;
  };
  const double dn = static_cast<double>(n);
  std::vector<double> d;
  switch (kind) {
    case SpectrumKind::Zero:
      if (n < 2) throw std::invalid_argument("laplacian_eigs(zero): need n >= 2");
      for (std::size_t k = 1; k < n; ++k) d.push_back(sin2(k * pi / (2.0 * dn)));
      return d;
    case SpectrumKind::Mirror:
      if (n < 1) throw std::invalid_argument("laplacian_eigs(mirr): need n >= 1");
      for (std::size_t j = 0; j < n; ++j) d.push_back(sin2(j * pi / (2.0 * dn)));
      return d;
    case SpectrumKind::Periodic:
      if (n < 1) throw std::invalid_argument("laplacian_eigs(per): need n >= 1");
      for (std::size_t k = 0; k < n; ++k) d.push_back(sin2(k * pi / dn));
      return d;
  }
  throw std::invalid_argument("laplacian_eigs: invalid spectrum kind");
}

namespace detail {

struct PlanDeleter {
  void operator()(fftw_plan plan) const noexcept {
    if (plan) fftw_destroy_plan(plan);
  }
};
using UniquePlan = std::unique_ptr<std::remove_pointer_t<fftw_plan>, PlanDeleter>;

constexpr unsigned kPlanFlags = FFTW_ESTIMATE | FFTW_UNALIGNED;

/// In-place r2r transform of every line along one axis of a column-major
/// array with `inner` entries before the axis and `outer` after it.
inline UniquePlan make_axis_plan(fftw_r2r_kind kind, std::size_t n,
                                 std::size_t inner, std::size_t outer) {
  std::vector<double> scratch(n * inner * outer);
  const auto sn = static_cast<std::ptrdiff_t>(n);
  const auto si = static_cast<std::ptrdiff_t>(inner);
  const auto so = static_cast<std::ptrdiff_t>(outer);
  fftw_iodim64 dim{sn, si, si};
  fftw_iodim64 howmany[2] = {{si, 1, 1}, {so, sn * si, sn * si}};
  fftw_plan plan = fftw_plan_guru64_r2r(1, &dim, 2, howmany, scratch.data(),
                                        scratch.data(), &kind, kPlanFlags);
  if (!plan) throw std::runtime_error("FFTW failed to create an r2r plan");
  return UniquePlan(plan);
}

inline std::vector<double> run_r2r(std::span<const double> v, fftw_r2r_kind kind) {
  std::vector<double> out(v.begin(), v.end());
  UniquePlan plan = make_axis_plan(kind, out.size(), 1, 1);
  fftw_execute_r2r(plan.get(), out.data(), out.data());
  return out;
}

inline std::vector<std::complex<double>> run_dft(
    std::span<const std::complex<double>> v, int sign) {
  const std::size_t n = v.size();
  if (n < 1) throw std::invalid_argument("dft: length must be >= 1");
  std::vector<std::complex<double>> out(v.begin(), v.end());
  auto* data = reinterpret_cast<fftw_complex*>(out.data());
  UniquePlan plan(fftw_plan_dft_1d(static_cast<int>(n), data, data, sign,
                                   kPlanFlags));
  if (!plan) throw std::runtime_error("FFTW failed to create a DFT plan");
  fftw_execute(plan.get());
  const double scale = 1.0 / std::sqrt(static_cast<double>(n));
  for (auto& c : out) c *= scale;
  return out;
}

}  // namespace detail

/// C_n v.
inline std::vector<double> dct2(std::span<const double> v) {
  const std::size_t n = v.size();
  if (n < 1) throw std::invalid_argument("dct2: length must be >= 1");
  std::vector<double> out = detail::run_r2r(v, FFTW_REDFT10);
  const double scale = 1.0 / std::sqrt(2.0 * static_cast<double>(n));
  for (double& x : out) x *= scale;
  out[0] /= std::numbers::sqrt2;
  return out;
}

/// C_n^T v, the inverse of dct2.
inline std::vector<double> idct2(std::span<const double> v) {
  const std::size_t n = v.size();
  if (n < 1) throw std::invalid_argument("idct2: length must be >= 1");
  std::vector<double> in(v.begin(), v.end());
  const double dn = static_cast<double>(n);
  in[0] /= std::sqrt(dn);
  for (std::size_t j = 1; j < n; ++j) in[j] /= std::sqrt(2.0 * dn);
  return detail::run_r2r(in, FFTW_REDFT01);
}

/// S_{n-1} v for |v| = n - 1. S_{n-1} is symmetric and orthogonal.
inline std::vector<double> dst1(std::span<const double> v) {
  if (v.size() < 1) throw std::invalid_argument("dst1: length must be >= 1");
  std::vector<double> out = detail::run_r2r(v, FFTW_RODFT00);
  const double scale = 1.0 / std::sqrt(2.0 * static_cast<double>(v.size() + 1));
  for (double& x : out) x *= scale;
  return out;
}

/// F_n v.
inline std::vector<std::complex<double>> dft(std::span<const std::complex<double>> v) {
  return detail::run_dft(v, FFTW_FORWARD);
}

/// conj(F_n) v, the inverse of dft.
inline std::vector<std::complex<double>> idft(std::span<const std::complex<double>> v) {
  return detail::run_dft(v, FFTW_BACKWARD);
}

/// Product of the circulant matrix with first column `a` and `x`, computed as
/// conj(F) diag(sqrt(n) F a) F x.
inline std::vector<double> circulant_multiply(std::span<const double> a,
                                              std::span<const double> x) {
  if (a.size() != x.size()) {
    throw std::invalid_argument("circulant_multiply: length mismatch");
  }
  const std::size_t n = a.size();
  std::vector<std::complex<double>> ac(a.begin(), a.end()), xc(x.begin(), x.end());
  auto fa = dft(ac);
  auto fx = dft(xc);
  const double root_n = std::sqrt(static_cast<double>(n));
  for (std::size_t k = 0; k < n; ++k) fx[k] *= root_n * fa[k];
  auto y = idft(fx);
  std::vector<double> out(n);
  for (std::size_t k = 0; k < n; ++k) out[k] = y[k].real();
  return out;
}

/// Transform applied along one axis of a SpectralPlan. Identity leaves the
/// axis untouched (eigenvalue 0).
enum class TransformKind { Identity, DctII, DstI, Dft };

/// Eigenvalues matched to the coefficients of one transform axis.
///   DctII -> d^mirr_n, DstI (length n) -> d^zero_n, Dft -> d^per_n.
/// For Dft the coefficients are stored in FFTW's half-complex order; since
/// d^per is symmetric (d[k] = d[n-k]) the array lines up index by index.
inline std::vector<double> axis_eigenvalues(TransformKind kind, std::size_t n) {
  switch (kind) {
    case TransformKind::Identity: return std::vector<double>(n, 0.0);
    case TransformKind::DctII: return laplacian_eigs(SpectrumKind::Mirror, n);
    case TransformKind::DstI: return laplacian_eigs(SpectrumKind::Zero, n + 1);
    case TransformKind::Dft: return laplacian_eigs(SpectrumKind::Periodic, n);
  }
  throw std::invalid_argument("axis_eigenvalues: invalid transform kind");
}

/// Separable spectral calculus on a column-major array: applies
///   T^{-1} diag(symbol) T,   T = T_last (x) ... (x) T_first,
/// where each T_a diagonalizes the 1D Laplacian of its axis. Any function of
/// the per-axis Laplacians (Poisson solves, pseudo-inverses, Schur factors) is
/// one symbol. Immutable after construction; apply() is reentrant.
class SpectralPlan {
 public:
  static constexpr std::size_t kMaxAxes = 5;

  SpectralPlan() = default;

  SpectralPlan(Extents extents, std::vector<TransformKind> kinds)
      : extents_(std::move(extents)), kinds_(std::move(kinds)) {
    if (extents_.size() != kinds_.size() || extents_.size() > kMaxAxes) {
      throw std::invalid_argument("SpectralPlan: need one transform kind per axis");
    }
    size_ = element_count(extents_);
    scale_ = 1.0;
    for (std::size_t axis = 0; axis < extents_.size(); ++axis) {
      const std::size_t n = extents_[axis];
      eigenvalues_.push_back(n ? axis_eigenvalues(kinds_[axis], n)
                               : std::vector<double>{});
      forward_.emplace_back();
      backward_.emplace_back();
      if (size_ == 0 || n <= 1 || kinds_[axis] == TransformKind::Identity) continue;
      std::size_t inner = 1, outer = 1;
      for (std::size_t a = 0; a < axis; ++a) inner *= extents_[a];
      for (std::size_t a = axis + 1; a < extents_.size(); ++a) outer *= extents_[a];
      fftw_r2r_kind fwd{}, bwd{};
      switch (kinds_[axis]) {
        case TransformKind::DctII:
          fwd = FFTW_REDFT10, bwd = FFTW_REDFT01, scale_ *= 2.0 * n;
          break;
        case TransformKind::DstI:
          fwd = FFTW_RODFT00, bwd = FFTW_RODFT00, scale_ *= 2.0 * (n + 1);
          break;
        case TransformKind::Dft:
          fwd = FFTW_R2HC, bwd = FFTW_HC2R, scale_ *= static_cast<double>(n);
          break;
        case TransformKind::Identity: break;
      }
      forward_.back() = detail::make_axis_plan(fwd, n, inner, outer);
      backward_.back() = detail::make_axis_plan(bwd, n, inner, outer);
    }
  }

  const Extents& extents() const noexcept { return extents_; }
  std::size_t size() const noexcept { return size_; }
  TransformKind kind(std::size_t axis) const { return kinds_.at(axis); }
  const std::vector<double>& eigenvalues(std::size_t axis) const {
    return eigenvalues_.at(axis);
  }

  /// Factor by which an unnormalized forward/backward round trip scales data.
  double normalization() const noexcept { return scale_; }

  /// Tabulates fn(eigs) over all coefficients, where eigs[a] is the axis-a
  /// eigenvalue of that coefficient, with the transform normalization folded in.
  template <class Fn>
  std::vector<double> make_symbol(Fn&& fn) const {
    std::vector<double> symbol(size_);
    if (size_ == 0) return symbol;
    const std::size_t rank = extents_.size();
    std::array<std::size_t, kMaxAxes> index{};
    std::array<double, kMaxAxes> eigs{};
    for (std::size_t a = 0; a < rank; ++a) eigs[a] = eigenvalues_[a][0];
    const double inv_scale = 1.0 / scale_;
    for (std::size_t i = 0; i < size_; ++i) {
      symbol[i] = fn(std::span<const double>(eigs.data(), rank)) * inv_scale;
      for (std::size_t a = 0; a < rank; ++a) {
        if (++index[a] < extents_[a]) {
          eigs[a] = eigenvalues_[a][index[a]];
          break;
        }
        index[a] = 0;
        eigs[a] = eigenvalues_[a][0];
      }
    }
    return symbol;
  }

  void apply(std::span<double> data, std::span<const double> symbol) const {
    if (data.size() != size_ || symbol.size() != size_) {
      throw ShapeError("SpectralPlan::apply: expected " + std::to_string(size_) +
                       " values, got " + std::to_string(data.size()));
    }
    if (size_ == 0) return;
    for (const auto& plan : forward_) {
      if (plan) fftw_execute_r2r(plan.get(), data.data(), data.data());
    }
    for (std::size_t i = 0; i < size_; ++i) data[i] *= symbol[i];
    for (auto it = backward_.rbegin(); it != backward_.rend(); ++it) {
      if (*it) fftw_execute_r2r(it->get(), data.data(), data.data());
    }
  }

 private:
  Extents extents_;
  std::vector<TransformKind> kinds_;
  std::vector<std::vector<double>> eigenvalues_;
  std::vector<detail::UniquePlan> forward_;
  std::vector<detail::UniquePlan> backward_;
  std::size_t size_ = 0;
  double scale_ = 1.0;
};

}  // namespace colorot

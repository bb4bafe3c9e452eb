#pragma once

// Averaging and difference operators of the staggered discretization,
// applied matrix-free line by line:
//
//   S_m m          midpoint momentum, block i averaged along axis i
//   S_f f + f^+    midpoint density, adjacent time layers averaged
//   A (m, f)       = D_m m + D_f f, the discrete (negated) continuity operator
//
// Face convention along an axis of length N: cell c (0-based) sits between
// physical faces c and c+1. Mirror axes store faces 1..N-1 (m vanishes on the
// boundary); periodic axes store faces 0..N-1 and face N coincides with face 0.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "colorot/grid.hpp"

namespace colorot {

namespace detail {

/// Calls fn(in_base, out_base) for every line along `axis`. Both arrays share
/// all extents except the one along the axis; lines are strided by `inner`.
template <class Fn>
void for_each_line(const Extents& extents, std::size_t axis, Fn&& fn) {
  std::size_t inner = 1, outer = 1;
  for (std::size_t a = 0; a < axis; ++a) inner *= extents[a];
  for (std::size_t a = axis + 1; a < extents.size(); ++a) outer *= extents[a];
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t i = 0; i < inner; ++i) fn(o, i, inner);
  }
}

inline void check_length(std::span<const double> v, std::size_t expected,
                         const char* what) {
  if (v.size() != expected) {
    throw ShapeError(std::string(what) + ": got " + std::to_string(v.size()) +
                     " values, expected " + std::to_string(expected));
  }
}

}  // namespace detail

/// All operators of one transport problem plus the cached boundary vectors
/// f^+ = 1/2 (f0, 0, f1) and f^- = P (-f0, 0, f1). Immutable.
class OperatorSet {
 public:
  OperatorSet(GridSpec grid, NdArray<double> f0, NdArray<double> f1)
      : grid_(std::move(grid)), f0_(std::move(f0)), f1_(std::move(f1)) {
    grid_.validate();
    check_extents(f0_.extents(), grid_.layer_extents(), "f0");
    check_extents(f1_.extents(), grid_.layer_extents(), "f1");
    sizes_ = field_sizes(grid_);
    cells_ = grid_.cells();
    const std::size_t P = grid_.time_steps;
    const double dP = static_cast<double>(P);
    f_plus_.assign(sizes_.midpoint_total, 0.0);
    f_minus_.assign(sizes_.midpoint_total, 0.0);
    const std::size_t last = (P - 1) * cells_;
    for (std::size_t c = 0; c < cells_; ++c) {
      f_plus_[c] += 0.5 * f0_[c];
      f_plus_[last + c] += 0.5 * f1_[c];
      f_minus_[c] -= dP * f0_[c];
      f_minus_[last + c] += dP * f1_[c];
    }
  }

  const GridSpec& grid() const noexcept { return grid_; }
  const FieldSizes& sizes() const noexcept { return sizes_; }
  const NdArray<double>& f0() const noexcept { return f0_; }
  const NdArray<double>& f1() const noexcept { return f1_; }
  const std::vector<double>& f_plus() const noexcept { return f_plus_; }
  const std::vector<double>& f_minus() const noexcept { return f_minus_; }

  /// Entries of one midpoint block (cells * P). S_m m has grid.axes() blocks.
  std::size_t midpoint_size() const noexcept { return sizes_.midpoint_total; }

  // ---- momentum operators ------------------------------------------------

  /// S_m m: block i of the output is block i of m averaged along axis i.
  void apply_Sm(std::span<const double> m, std::span<double> out) const {
    detail::check_length(m, sizes_.m_total, "apply_Sm input");
    detail::check_length(out, grid_.axes() * midpoint_size(), "apply_Sm output");
    for (std::size_t axis = 0; axis < grid_.axes(); ++axis) {
      face_to_cell(axis, block(m, axis), out.subspan(axis * midpoint_size(), midpoint_size()),
                   0.5, +1.0, false);
    }
  }

  void apply_Sm_adjoint(std::span<const double> u, std::span<double> m) const {
    detail::check_length(u, grid_.axes() * midpoint_size(), "apply_Sm_adjoint input");
    detail::check_length(m, sizes_.m_total, "apply_Sm_adjoint output");
    for (std::size_t axis = 0; axis < grid_.axes(); ++axis) {
      cell_to_face(axis, u.subspan(axis * midpoint_size(), midpoint_size()),
                   block(m, axis), 0.5, +1.0, false);
    }
  }

  /// D_m m, the spatial part of A; `accumulate` adds into `out`.
  void apply_Dm(std::span<const double> m, std::span<double> out,
                bool accumulate = false) const {
    detail::check_length(m, sizes_.m_total, "apply_Dm input");
    detail::check_length(out, midpoint_size(), "apply_Dm output");
    if (!accumulate) std::fill(out.begin(), out.end(), 0.0);
    for (std::size_t axis = 0; axis < grid_.axes(); ++axis) {
      const double n = static_cast<double>(grid_.spatial_dims[axis]);
      face_to_cell(axis, block(m, axis), out, n, -1.0, true);
    }
  }

  void apply_Dm_adjoint(std::span<const double> y, std::span<double> m) const {
    detail::check_length(y, midpoint_size(), "apply_Dm_adjoint input");
    detail::check_length(m, sizes_.m_total, "apply_Dm_adjoint output");
    for (std::size_t axis = 0; axis < grid_.axes(); ++axis) {
      const double n = static_cast<double>(grid_.spatial_dims[axis]);
      cell_to_face(axis, y, block(m, axis), n, -1.0, false);
    }
  }

  // ---- density operators -------------------------------------------------

  /// S_f f (interior layers only); add f_plus() for the full midpoint density.
  void apply_Sf(std::span<const double> f, std::span<double> out) const {
    detail::check_length(f, sizes_.f_total, "apply_Sf input");
    detail::check_length(out, midpoint_size(), "apply_Sf output");
    layers_to_intervals(f, out, 0.5, +1.0);
  }

  /// S_f f + f^+.
  void apply_Sf_plus(std::span<const double> f, std::span<double> out) const {
    apply_Sf(f, out);
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += f_plus_[i];
  }

  void apply_Sf_adjoint(std::span<const double> v, std::span<double> f) const {
    detail::check_length(v, midpoint_size(), "apply_Sf_adjoint input");
    detail::check_length(f, sizes_.f_total, "apply_Sf_adjoint output");
    intervals_to_layers(v, f, 0.5, +1.0, false);
  }

  /// D_f f, the temporal part of A.
  void apply_Df(std::span<const double> f, std::span<double> out) const {
    detail::check_length(f, sizes_.f_total, "apply_Df input");
    detail::check_length(out, midpoint_size(), "apply_Df output");
    layers_to_intervals(f, out, static_cast<double>(grid_.time_steps), -1.0);
  }

  void apply_Df_adjoint(std::span<const double> y, std::span<double> f,
                        bool accumulate = false) const {
    detail::check_length(y, midpoint_size(), "apply_Df_adjoint input");
    detail::check_length(f, sizes_.f_total, "apply_Df_adjoint output");
    intervals_to_layers(y, f, static_cast<double>(grid_.time_steps), -1.0, accumulate);
  }

  // ---- combined constraint operator ---------------------------------------

  /// A (m, f) = D_m m + D_f f for x = (m, f) flattened.
  void apply_A(std::span<const double> x, std::span<double> out) const {
    detail::check_length(x, sizes_.total(), "apply_A input");
    apply_Df(x.subspan(sizes_.m_total), out);
    apply_Dm(x.first(sizes_.m_total), out, true);
  }

  std::vector<double> apply_A(std::span<const double> x) const {
    std::vector<double> out(midpoint_size());
    apply_A(x, out);
    return out;
  }

  void apply_A_adjoint(std::span<const double> y, std::span<double> x) const {
    detail::check_length(x, sizes_.total(), "apply_A_adjoint output");
    apply_Dm_adjoint(y, x.first(sizes_.m_total));
    apply_Df_adjoint(y, x.subspan(sizes_.m_total));
  }

  std::vector<double> apply_A_adjoint(std::span<const double> y) const {
    std::vector<double> x(sizes_.total());
    apply_A_adjoint(y, x);
    return x;
  }

  /// ||A x - f^-||_2.
  double residual(std::span<const double> x) const {
    std::vector<double> r = apply_A(x);
    double sum = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      const double d = r[i] - f_minus_[i];
      sum += d * d;
    }
    return std::sqrt(sum);
  }

  // ---- typed convenience overloads ----------------------------------------

  std::vector<double> apply_Sm(const FaceField& m) const {
    std::vector<double> out(grid_.axes() * midpoint_size());
    apply_Sm(flatten(m, grid_), out);
    return out;
  }

  std::vector<double> apply_Sf_plus(const CenterField& f) const {
    std::vector<double> out(midpoint_size());
    apply_Sf_plus(flatten(f, grid_), out);
    return out;
  }

  std::vector<double> apply_A(const FaceField& m, const CenterField& f) const {
    std::vector<double> x = flatten(m, grid_);
    std::vector<double> fv = flatten(f, grid_);
    x.insert(x.end(), fv.begin(), fv.end());
    return apply_A(std::span<const double>(x));
  }

  /// Total mass of every time layer, endpoints included (P + 1 values).
  std::vector<double> mass_per_layer(std::span<const double> f) const {
    detail::check_length(f, sizes_.f_total, "mass_per_layer input");
    std::vector<double> mass(grid_.time_steps + 1, 0.0);
    for (std::size_t c = 0; c < cells_; ++c) {
      mass.front() += f0_[c];
      mass.back() += f1_[c];
    }
    for (std::size_t t = 0; t + 1 < grid_.time_steps; ++t) {
      double sum = 0.0;
      for (std::size_t c = 0; c < cells_; ++c) sum += f[t * cells_ + c];
      mass[t + 1] = sum;
    }
    return mass;
  }

 private:
  std::span<const double> block(std::span<const double> m, std::size_t axis) const {
    return m.subspan(sizes_.m_offsets[axis], element_count(sizes_.m_blocks[axis]));
  }
  std::span<double> block(std::span<double> m, std::size_t axis) const {
    return m.subspan(sizes_.m_offsets[axis], element_count(sizes_.m_blocks[axis]));
  }

  /// out[c] (+)= scale * (face_c + sign * face_{c+1}) along `axis`.
  void face_to_cell(std::size_t axis, std::span<const double> in,
                    std::span<double> out, double scale, double sign,
                    bool accumulate) const {
    const std::size_t n = grid_.spatial_dims[axis];
    const bool periodic = grid_.boundary(axis) == BoundaryKind::Periodic;
    const std::size_t nf = periodic ? n : n - 1;
    const auto [stride, outer] = line_layout(axis);
    for (std::size_t o = 0; o < outer; ++o) {
      const double* src = in.data() + o * nf * stride;
      double* dst = out.data() + o * n * stride;
      // face j -> stored row (mirror: faces 1..n-1 at rows 0..n-2, others 0)
      auto face = [&](std::size_t j) -> const double* {
        if (periodic) return src + (j % n) * stride;
        return (j >= 1 && j <= n - 1) ? src + (j - 1) * stride : nullptr;
      };
      for (std::size_t c = 0; c < n; ++c) {
        const double* a = face(c);
        const double* b = face(c + 1);
        double* d = dst + c * stride;
        if (!accumulate) std::fill(d, d + stride, 0.0);
        if (a && b) {
          for (std::size_t i = 0; i < stride; ++i) d[i] += scale * (a[i] + sign * b[i]);
        } else if (a) {
          for (std::size_t i = 0; i < stride; ++i) d[i] += scale * a[i];
        } else if (b) {
          const double sb = scale * sign;
          for (std::size_t i = 0; i < stride; ++i) d[i] += sb * b[i];
        }
      }
    }
  }

  /// Adjoint of face_to_cell: face_j (+)= scale * (cell_j + sign * cell_{j-1}).
  void cell_to_face(std::size_t axis, std::span<const double> in,
                    std::span<double> out, double scale, double sign,
                    bool accumulate) const {
    const std::size_t n = grid_.spatial_dims[axis];
    const bool periodic = grid_.boundary(axis) == BoundaryKind::Periodic;
    const std::size_t nf = periodic ? n : n - 1;
    const auto [stride, outer] = line_layout(axis);
    for (std::size_t o = 0; o < outer; ++o) {
      const double* src = in.data() + o * n * stride;
      double* dst = out.data() + o * nf * stride;
      for (std::size_t s = 0; s < nf; ++s) {
        const std::size_t j = periodic ? s : s + 1;  // physical face
        const std::size_t left = periodic ? (j + n - 1) % n : j - 1;
        const std::size_t right = periodic ? j % n : j;
        const double* r = src + right * stride;
        const double* l = src + left * stride;
        double* d = dst + s * stride;
        if (accumulate) {
          for (std::size_t i = 0; i < stride; ++i) d[i] += scale * (r[i] + sign * l[i]);
        } else {
          for (std::size_t i = 0; i < stride; ++i) d[i] = scale * (r[i] + sign * l[i]);
        }
      }
    }
  }

  /// (product of extents before axis, product after) on the midpoint grid.
  std::pair<std::size_t, std::size_t> line_layout(std::size_t axis) const {
    const Extents e = grid_.midpoint_extents();
    std::size_t inner = 1, outer = 1;
    for (std::size_t a = 0; a < axis; ++a) inner *= e[a];
    for (std::size_t a = axis + 1; a < e.size(); ++a) outer *= e[a];
    return {inner, outer};
  }

  /// out_t = scale * (F_t + sign * F_{t+1}) over interior layers (endpoints 0).
  void layers_to_intervals(std::span<const double> f, std::span<double> out,
                           double scale, double sign) const {
    const std::size_t P = grid_.time_steps;
    for (std::size_t t = 0; t < P; ++t) {
      double* dst = out.data() + t * cells_;
      const double* lo = t >= 1 ? f.data() + (t - 1) * cells_ : nullptr;
      const double* hi = t + 1 <= P - 1 ? f.data() + t * cells_ : nullptr;
      for (std::size_t c = 0; c < cells_; ++c) {
        const double a = lo ? lo[c] : 0.0;
        const double b = hi ? hi[c] : 0.0;
        dst[c] = scale * (a + sign * b);
      }
    }
  }

  /// Adjoint: layer l (1..P-1) gets scale * (sign * y_{l-1} + y_l).
  void intervals_to_layers(std::span<const double> y, std::span<double> f,
                           double scale, double sign, bool accumulate) const {
    const std::size_t P = grid_.time_steps;
    for (std::size_t l = 1; l < P; ++l) {
      const double* before = y.data() + (l - 1) * cells_;
      const double* after = y.data() + l * cells_;
      double* dst = f.data() + (l - 1) * cells_;
      for (std::size_t c = 0; c < cells_; ++c) {
        const double value = scale * (sign * before[c] + after[c]);
        if (accumulate) dst[c] += value;
        else dst[c] = value;
      }
    }
  }

  GridSpec grid_;
  NdArray<double> f0_, f1_;
  FieldSizes sizes_;
  std::size_t cells_ = 0;
  std::vector<double> f_plus_, f_minus_;
};

}  // namespace colorot

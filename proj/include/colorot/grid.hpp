#pragma once

// Space-time staggered grid: boundary bookkeeping, field containers and the
// column-major flattening convention shared by every other module.
//
// Densities f live at cell centres and integer time layers, momenta m live on
// cell faces at half-integer times. All arrays are stored column-major (first
// axis fastest, time last), so vec(A F B^T) = (B (x) A) vec(F) holds verbatim.

#include <algorithm>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace colorot {

enum class BoundaryKind { Mirror, Periodic };

/// Number of boundary faces dropped from a momentum block (1 mirror, 0 periodic).
constexpr std::size_t kappa(BoundaryKind kind) noexcept {
  return kind == BoundaryKind::Mirror ? 1 : 0;
}

inline const char* to_string(BoundaryKind kind) noexcept {
  return kind == BoundaryKind::Mirror ? "mirror" : "periodic";
}

inline BoundaryKind boundary_from_string(const std::string& name) {
  if (name == "mirror") return BoundaryKind::Mirror;
  if (name == "periodic") return BoundaryKind::Periodic;
  throw std::invalid_argument("unknown boundary kind '" + name +
                              "' (expected mirror or periodic)");
}

/// Thrown when an array does not have the shape the grid requires.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

using Extents = std::vector<std::size_t>;

inline std::size_t element_count(const Extents& extents) {
  return std::accumulate(extents.begin(), extents.end(), std::size_t{1},
                         std::multiplies<>{});
}

inline std::string format_extents(const Extents& extents) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < extents.size(); ++i) {
    if (i) os << ", ";
    os << extents[i];
  }
  os << ')';
  return os.str();
}

/// Throws ShapeError naming the first offending axis.
inline void check_extents(const Extents& actual, const Extents& expected,
                          const std::string& what) {
  if (actual.size() != expected.size()) {
    throw ShapeError(what + ": expected " + std::to_string(expected.size()) +
                     " axes " + format_extents(expected) + ", got " +
                     std::to_string(actual.size()) + " axes " +
                     format_extents(actual));
  }
  for (std::size_t axis = 0; axis < actual.size(); ++axis) {
    if (actual[axis] != expected[axis]) {
      throw ShapeError(what + ": axis " + std::to_string(axis) + " has extent " +
                       std::to_string(actual[axis]) + ", expected " +
                       std::to_string(expected[axis]));
    }
  }
}

/// Dense column-major array of arbitrary rank.
template <class T = double>
class NdArray {
 public:
  NdArray() = default;

  explicit NdArray(Extents extents, T fill = T{})
      : extents_(std::move(extents)), data_(element_count(extents_), fill) {}

  NdArray(Extents extents, std::vector<T> data)
      : extents_(std::move(extents)), data_(std::move(data)) {
    if (data_.size() != element_count(extents_)) {
      throw ShapeError("NdArray: " + std::to_string(data_.size()) +
                       " values do not fill extents " +
                       format_extents(extents_));
    }
  }

  const Extents& extents() const noexcept { return extents_; }
  std::size_t rank() const noexcept { return extents_.size(); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<T> values() noexcept { return data_; }
  std::span<const T> values() const noexcept { return data_; }
  std::vector<T>& storage() noexcept { return data_; }
  const std::vector<T>& storage() const noexcept { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  template <class... Index>
  T& operator()(Index... index) {
    return data_[offset({static_cast<std::size_t>(index)...})];
  }
  template <class... Index>
  const T& operator()(Index... index) const {
    return data_[offset({static_cast<std::size_t>(index)...})];
  }

  friend bool operator==(const NdArray&, const NdArray&) = default;

 private:
  std::size_t offset(std::initializer_list<std::size_t> index) const {
    std::size_t result = 0;
    std::size_t stride = 1;
    std::size_t axis = 0;
    for (std::size_t i : index) {
      result += i * stride;
      stride *= extents_[axis++];
    }
    return result;
  }

  Extents extents_;
  std::vector<T> data_;
};

/// Spatial sizes, number of time steps and boundary kinds. Every array shape in
/// the library is a pure function of this record.
///
/// spatial_dims has one entry for signals, two for grayscale images and three
/// for RGB images (third entry 3, the colour axis).
struct GridSpec {
  Extents spatial_dims;
  std::size_t time_steps = 32;
  BoundaryKind spatial_boundary = BoundaryKind::Mirror;
  BoundaryKind color_boundary = BoundaryKind::Periodic;

  void validate() const {
    if (spatial_dims.empty() || spatial_dims.size() > 3) {
      throw std::invalid_argument("GridSpec: expected 1 to 3 spatial axes, got " +
                                  std::to_string(spatial_dims.size()));
    }
    for (std::size_t axis = 0; axis < spatial_dims.size(); ++axis) {
      if (spatial_dims[axis] == 0) {
        throw std::invalid_argument("GridSpec: spatial axis " +
                                    std::to_string(axis) + " has zero extent");
      }
    }
    if (spatial_dims.size() == 3 && spatial_dims[2] != 3) {
      throw std::invalid_argument(
          "GridSpec: RGB grids need 3 entries on the colour axis, got " +
          std::to_string(spatial_dims[2]));
    }
    if (time_steps < 2) {
      throw std::invalid_argument("GridSpec: need at least 2 time steps, got " +
                                  std::to_string(time_steps));
    }
  }

  std::size_t axes() const noexcept { return spatial_dims.size(); }
  bool has_color_axis() const noexcept { return spatial_dims.size() == 3; }

  BoundaryKind boundary(std::size_t axis) const noexcept {
    return axis == 2 ? color_boundary : spatial_boundary;
  }

  /// Faces stored along `axis` in its momentum block: N_i - kappa_i.
  std::size_t faces(std::size_t axis) const noexcept {
    return spatial_dims[axis] - kappa(boundary(axis));
  }

  std::size_t cells() const noexcept { return element_count(spatial_dims); }

  /// One spatial layer (shape of f0 and f1).
  Extents layer_extents() const { return spatial_dims; }

  /// Interior density layers t = 1/P, ..., (P-1)/P.
  Extents interior_extents() const {
    Extents e = spatial_dims;
    e.push_back(time_steps - 1);
    return e;
  }

  /// Cell centres at the P half-integer times (midpoints, residual rows).
  Extents midpoint_extents() const {
    Extents e = spatial_dims;
    e.push_back(time_steps);
    return e;
  }

  Extents face_extents(std::size_t axis) const {
    Extents e = spatial_dims;
    e[axis] = faces(axis);
    e.push_back(time_steps);
    return e;
  }

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

/// Lengths and block shapes of the flattened (m, f) vector.
struct FieldSizes {
  std::vector<Extents> m_blocks;
  std::vector<std::size_t> m_offsets;  // start of each block inside m
  std::size_t m_total = 0;
  Extents f_extents;
  std::size_t f_total = 0;
  std::size_t midpoint_total = 0;  // cells * P, also the number of rows of A

  std::size_t total() const noexcept { return m_total + f_total; }
};

inline FieldSizes field_sizes(const GridSpec& grid) {
  FieldSizes sizes;
  for (std::size_t axis = 0; axis < grid.axes(); ++axis) {
    sizes.m_blocks.push_back(grid.face_extents(axis));
    sizes.m_offsets.push_back(sizes.m_total);
    sizes.m_total += element_count(sizes.m_blocks.back());
  }
  sizes.f_extents = grid.interior_extents();
  sizes.f_total = element_count(sizes.f_extents);
  sizes.midpoint_total = grid.cells() * grid.time_steps;
  return sizes;
}

/// Momentum samples, one block per spatial axis.
struct FaceField {
  std::vector<NdArray<double>> blocks;
  friend bool operator==(const FaceField&, const FaceField&) = default;
};

/// Interior density layers plus the fixed endpoint images.
struct CenterField {
  NdArray<double> interior;
  NdArray<double> f0;
  NdArray<double> f1;
  friend bool operator==(const CenterField&, const CenterField&) = default;
};

inline std::vector<double> flatten(const FaceField& m, const GridSpec& grid) {
  if (m.blocks.size() != grid.axes()) {
    throw ShapeError("FaceField: expected " + std::to_string(grid.axes()) +
                     " blocks, got " + std::to_string(m.blocks.size()));
  }
  std::vector<double> out;
  out.reserve(field_sizes(grid).m_total);
  for (std::size_t axis = 0; axis < grid.axes(); ++axis) {
    check_extents(m.blocks[axis].extents(), grid.face_extents(axis),
                  "FaceField block " + std::to_string(axis));
    out.insert(out.end(), m.blocks[axis].storage().begin(),
               m.blocks[axis].storage().end());
  }
  return out;
}

inline std::vector<double> flatten(const CenterField& f, const GridSpec& grid) {
  check_extents(f.interior.extents(), grid.interior_extents(),
                "CenterField interior");
  check_extents(f.f0.extents(), grid.layer_extents(), "CenterField f0");
  check_extents(f.f1.extents(), grid.layer_extents(), "CenterField f1");
  return f.interior.storage();
}

inline FaceField unflatten_faces(std::span<const double> m, const GridSpec& grid) {
  const FieldSizes sizes = field_sizes(grid);
  if (m.size() != sizes.m_total) {
    throw ShapeError("momentum vector has length " + std::to_string(m.size()) +
                     ", expected " + std::to_string(sizes.m_total));
  }
  FaceField out;
  for (std::size_t axis = 0; axis < grid.axes(); ++axis) {
    auto first = m.begin() + static_cast<std::ptrdiff_t>(sizes.m_offsets[axis]);
    auto count = static_cast<std::ptrdiff_t>(element_count(sizes.m_blocks[axis]));
    out.blocks.emplace_back(sizes.m_blocks[axis],
                            std::vector<double>(first, first + count));
  }
  return out;
}

inline CenterField unflatten_centers(std::span<const double> f, const GridSpec& grid,
                                     NdArray<double> f0, NdArray<double> f1) {
  check_extents(f0.extents(), grid.layer_extents(), "f0");
  check_extents(f1.extents(), grid.layer_extents(), "f1");
  const Extents extents = grid.interior_extents();
  if (f.size() != element_count(extents)) {
    throw ShapeError("density vector has length " + std::to_string(f.size()) +
                     ", expected " + std::to_string(element_count(extents)));
  }
  return {NdArray<double>(extents, std::vector<double>(f.begin(), f.end())),
          std::move(f0), std::move(f1)};
}

/// Per-iteration diagnostics of a solver run.
struct RunReport {
  std::vector<double> energy_trace;
  std::vector<double> residual_trace;       // ||A(m,f) - f^-||_2
  std::vector<double> dual_residual_trace;  // max(|db_u|, |db_v|)
  std::size_t iterations = 0;
  double wall_time = 0.0;  // seconds
};

}  // namespace colorot

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string_view>
#include <vector>

#include "qlens/geometry.hpp"

namespace qlens {

/// Voxel counts per axis.
struct Dims {
  int x = 0;
  int y = 0;
  int z = 0;

  int operator[](int axis) const { return axis == 0 ? x : (axis == 1 ? y : z); }
  int max() const { return std::max({x, y, z}); }
  std::size_t count() const {
    return static_cast<std::size_t>(x) * static_cast<std::size_t>(y) * static_cast<std::size_t>(z);
  }
  bool operator==(const Dims&) const = default;
};

enum class ScalarEncoding { u8, u16le, f32le };

std::string_view to_string(ScalarEncoding encoding) noexcept;
ScalarEncoding parse_encoding(std::string_view text);  // throws unsupported_format
std::size_t element_size(ScalarEncoding encoding) noexcept;

struct ValueRange {
  double min = 0.0;
  double max = 0.0;
};

/// Regular scalar grid over the unit cube. Voxel (i,j,k) has its center at
/// ((i+0.5)/Dx, (j+0.5)/Dy, (k+0.5)/Dz); values are stored x-fastest.
///
/// Immutable after construction, so any number of render threads may read it.
class VolumeGrid {
 public:
  /// Throws validation/structural errors when dims < 2 on any axis or the
  /// value count does not match. `raw_range` defaults to the value range.
  VolumeGrid(Dims dims, Vec3 spacing, std::vector<float> values);
  VolumeGrid(Dims dims, Vec3 spacing, std::vector<float> values, ValueRange raw_range);

  const Dims& dims() const noexcept { return dims_; }
  const Vec3& spacing() const noexcept { return spacing_; }
  std::span<const float> values() const noexcept { return values_; }

  /// Min/max of the stored (normalized) values.
  ValueRange value_range() const noexcept { return value_range_; }
  /// Min/max in the source units before normalization.
  ValueRange raw_range() const noexcept { return raw_range_; }

  /// 99th-percentile gradient magnitude over voxel centers; 1 for flat fields.
  /// Used to bring gradient-magnitude focus values into [0,1].
  double gradient_scale() const noexcept { return gradient_scale_; }

  std::size_t linear_index(int i, int j, int k) const noexcept {
    return (static_cast<std::size_t>(k) * static_cast<std::size_t>(dims_.y) +
            static_cast<std::size_t>(j)) *
               static_cast<std::size_t>(dims_.x) +
           static_cast<std::size_t>(i);
  }
  float at(int i, int j, int k) const noexcept { return values_[linear_index(i, j, k)]; }

 private:
  Dims dims_;
  Vec3 spacing_;
  std::vector<float> values_;
  ValueRange value_range_;
  ValueRange raw_range_;
  double gradient_scale_ = 1.0;
};

enum class SyntheticKind {
  constant,      // background everywhere
  axis_linear,   // normalized coordinate along `axis`
  sphere_shell,  // Gaussian shell of `width` at `radius` around `center`
  radial_pulse,  // quadratic rise to a front at `radius`, Gaussian fall-off beyond
  step_edge,     // background below `position` along `axis`, background+amplitude above
};

std::string_view to_string(SyntheticKind kind) noexcept;
SyntheticKind parse_synthetic_kind(std::string_view text);

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::constant;
  Vec3 center{0.5, 0.5, 0.5};
  double radius = 0.3;
  double width = 0.05;
  double amplitude = 1.0;
  double background = 0.0;
  int axis = 0;
  double position = 0.5;

  /// Throws a validation error naming the offending parameter.
  void validate() const;
};

/// Evaluates the analytic field at every voxel center.
VolumeGrid generate_synthetic_volume(const SyntheticSpec& spec, Dims dims);

/// Field value of `spec` at a normalized position (the per-voxel kernel of
/// generate_synthetic_volume).
double evaluate_synthetic(const SyntheticSpec& spec, const Vec3& p);

struct RawDescriptor {
  Dims dims;
  ScalarEncoding encoding = ScalarEncoding::f32le;
  Vec3 spacing{1.0, 1.0, 1.0};
  std::uint64_t payload_offset = 0;  // bytes to skip before the payload
};

/// Reads a little-endian x-fastest payload and normalizes it into [0,1].
/// u8 and u16 divide by the type maximum; f32 passes through when already in
/// [0,1] and is min-max rescaled otherwise.
VolumeGrid load_raw_volume(const std::filesystem::path& path, const RawDescriptor& descriptor);

/// Parses the one-line "qvol1 Dx Dy Dz dtype sx sy sz" header.
RawDescriptor parse_qvol_header(std::string_view line);  // line excludes the trailing newline
std::string format_qvol_header(Dims dims, ScalarEncoding encoding, const Vec3& spacing);

VolumeGrid load_qvol(const std::filesystem::path& path);
void write_qvol(const std::filesystem::path& path, const VolumeGrid& grid,
                ScalarEncoding encoding = ScalarEncoding::f32le);

/// floor(p * D) per axis, clamped into [0, D-1].
std::array<int, 3> voxel_index(const Vec3& p, Dims dims) noexcept;

/// Trilinear reconstruction between voxel centers; positions outside the
/// unit cube clamp to the boundary.
double sample_trilinear(const VolumeGrid& grid, const Vec3& p) noexcept;

/// |grad f| by central differences of sample_trilinear with step 1/D per
/// axis, falling back to one-sided differences at the cube faces.
double gradient_magnitude(const VolumeGrid& grid, const Vec3& p) noexcept;

}  // namespace qlens

#include "qlens/volume.hpp"

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include "qlens/error.hpp"

namespace qlens {
namespace {

ValueRange compute_range(std::span<const float> values) {
  const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
  return {static_cast<double>(*lo), static_cast<double>(*hi)};
}

// Discrete |grad f| at voxel centers (central inside, one-sided at faces).
double percentile_gradient(const VolumeGrid& grid, double fraction) {
  const Dims& d = grid.dims();
  std::vector<float> magnitudes;
  magnitudes.reserve(d.count());
  const auto diff = [&](int axis, int i, int j, int k) {
    std::array<int, 3> lo{i, j, k};
    std::array<int, 3> hi{i, j, k};
    const int n = d[axis];
    const int c = lo[axis];
    lo[axis] = std::max(c - 1, 0);
    hi[axis] = std::min(c + 1, n - 1);
    const double span = static_cast<double>(hi[axis] - lo[axis]) / n;
    return (static_cast<double>(grid.at(hi[0], hi[1], hi[2])) -
            static_cast<double>(grid.at(lo[0], lo[1], lo[2]))) /
           span;
  };
  for (int k = 0; k < d.z; ++k) {
    for (int j = 0; j < d.y; ++j) {
      for (int i = 0; i < d.x; ++i) {
        const double gx = diff(0, i, j, k);
        const double gy = diff(1, i, j, k);
        const double gz = diff(2, i, j, k);
        magnitudes.push_back(static_cast<float>(std::sqrt(gx * gx + gy * gy + gz * gz)));
      }
    }
  }
  const auto rank = static_cast<std::size_t>(fraction * static_cast<double>(magnitudes.size() - 1));
  std::nth_element(magnitudes.begin(), magnitudes.begin() + static_cast<std::ptrdiff_t>(rank),
                   magnitudes.end());
  return magnitudes[rank];
}

// Real-valued fields already inside [0,1] are kept bit-for-bit; anything
// else is min-max rescaled. Returns the range before rescaling.
ValueRange normalize_unit_interval(std::vector<float>& values) {
  const ValueRange raw = compute_range(values);
  if (raw.min < 0.0 || raw.max > 1.0) {
    const double span = raw.max - raw.min;
    for (auto& v : values) {
      v = span > 0.0 ? static_cast<float>((static_cast<double>(v) - raw.min) / span) : 0.0F;
    }
  }
  return raw;
}

void check_dims(Dims dims) {
  if (dims.x < 2 || dims.y < 2 || dims.z < 2) {
    throw Error(ErrorKind::validation,
                "volume dims must satisfy Dx, Dy, Dz >= 2 (got " + std::to_string(dims.x) + " " +
                    std::to_string(dims.y) + " " + std::to_string(dims.z) + ")");
  }
}

std::string format_real(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

template <typename T>
T read_le(const unsigned char* p) {
  T out{};
  if constexpr (std::endian::native == std::endian::little) {
    std::memcpy(&out, p, sizeof(T));
  } else {
    unsigned char tmp[sizeof(T)];
    for (std::size_t b = 0; b < sizeof(T); ++b) tmp[b] = p[sizeof(T) - 1 - b];
    std::memcpy(&out, tmp, sizeof(T));
  }
  return out;
}

template <typename T>
void append_le(std::string& out, T value) {
  unsigned char tmp[sizeof(T)];
  std::memcpy(tmp, &value, sizeof(T));
  if constexpr (std::endian::native != std::endian::little) {
    std::reverse(tmp, tmp + sizeof(T));
  }
  out.append(reinterpret_cast<const char*>(tmp), sizeof(T));
}

}  // namespace

VolumeGrid::VolumeGrid(Dims dims, Vec3 spacing, std::vector<float> values)
    : VolumeGrid(dims, spacing, std::move(values), ValueRange{}) {
  raw_range_ = value_range_;
}

VolumeGrid::VolumeGrid(Dims dims, Vec3 spacing, std::vector<float> values, ValueRange raw_range)
    : dims_(dims), spacing_(spacing), values_(std::move(values)), raw_range_(raw_range) {
  check_dims(dims_);
  if (values_.size() != dims_.count()) {
    throw Error(ErrorKind::structural, "volume value count " + std::to_string(values_.size()) +
                                           " does not match dims product " +
                                           std::to_string(dims_.count()));
  }
  value_range_ = compute_range(values_);
  const double p99 = percentile_gradient(*this, 0.99);
  gradient_scale_ = p99 > 0.0 ? p99 : 1.0;
}

std::string_view to_string(ScalarEncoding encoding) noexcept {
  switch (encoding) {
    case ScalarEncoding::u8: return "u8";
    case ScalarEncoding::u16le: return "u16le";
    case ScalarEncoding::f32le: return "f32le";
  }
  return "?";
}

ScalarEncoding parse_encoding(std::string_view text) {
  if (text == "u8") return ScalarEncoding::u8;
  if (text == "u16le") return ScalarEncoding::u16le;
  if (text == "f32le") return ScalarEncoding::f32le;
  throw Error(ErrorKind::unsupported_format, "unsupported scalar encoding '" + std::string(text) +
                                                 "' (expected u8, u16le or f32le)");
}

std::size_t element_size(ScalarEncoding encoding) noexcept {
  switch (encoding) {
    case ScalarEncoding::u8: return 1;
    case ScalarEncoding::u16le: return 2;
    case ScalarEncoding::f32le: return 4;
  }
  return 0;
}

std::string_view to_string(SyntheticKind kind) noexcept {
  switch (kind) {
    case SyntheticKind::constant: return "constant";
    case SyntheticKind::axis_linear: return "axis_linear";
    case SyntheticKind::sphere_shell: return "sphere_shell";
    case SyntheticKind::radial_pulse: return "radial_pulse";
    case SyntheticKind::step_edge: return "step_edge";
  }
  return "?";
}

SyntheticKind parse_synthetic_kind(std::string_view text) {
  if (text == "constant") return SyntheticKind::constant;
  if (text == "axis_linear") return SyntheticKind::axis_linear;
  if (text == "sphere_shell") return SyntheticKind::sphere_shell;
  if (text == "radial_pulse") return SyntheticKind::radial_pulse;
  if (text == "step_edge") return SyntheticKind::step_edge;
  throw Error(ErrorKind::validation, "unknown synthetic volume kind '" + std::string(text) + "'");
}

void SyntheticSpec::validate() const {
  const auto fail = [](const std::string& what) { throw Error(ErrorKind::validation, what); };
  if (!std::isfinite(amplitude) || !std::isfinite(background)) {
    fail("synthetic amplitude and background must be finite");
  }
  switch (kind) {
    case SyntheticKind::constant:
      break;
    case SyntheticKind::axis_linear:
      if (axis < 0 || axis > 2) fail("synthetic axis must be 0, 1 or 2");
      break;
    case SyntheticKind::sphere_shell:
    case SyntheticKind::radial_pulse:
      if (!(width > 0.0)) fail("synthetic shell width must be > 0");
      if (!(radius > 0.0 && radius < 1.0)) fail("synthetic radius must lie in (0, 1)");
      if (!center.allFinite()) fail("synthetic center must be finite");
      break;
    case SyntheticKind::step_edge:
      if (axis < 0 || axis > 2) fail("synthetic axis must be 0, 1 or 2");
      if (!(position > 0.0 && position < 1.0)) fail("synthetic step position must lie in (0, 1)");
      break;
  }
}

double evaluate_synthetic(const SyntheticSpec& spec, const Vec3& p) {
  switch (spec.kind) {
    case SyntheticKind::constant:
      return spec.background;
    case SyntheticKind::axis_linear:
      return p[spec.axis];
    case SyntheticKind::sphere_shell: {
      const double r = (p - spec.center).norm();
      const double u = (r - spec.radius) / spec.width;
      return spec.background + spec.amplitude * std::exp(-u * u);
    }
    case SyntheticKind::radial_pulse: {
      const double r = (p - spec.center).norm();
      if (r <= spec.radius) {
        const double u = r / spec.radius;
        return spec.background + spec.amplitude * u * u;
      }
      const double u = (r - spec.radius) / spec.width;
      return spec.background + spec.amplitude * std::exp(-u * u);
    }
    case SyntheticKind::step_edge:
      return p[spec.axis] < spec.position ? spec.background : spec.background + spec.amplitude;
  }
  return 0.0;
}

VolumeGrid generate_synthetic_volume(const SyntheticSpec& spec, Dims dims) {
  check_dims(dims);
  spec.validate();
  std::vector<float> values(dims.count());
  std::size_t idx = 0;
  for (int k = 0; k < dims.z; ++k) {
    for (int j = 0; j < dims.y; ++j) {
      for (int i = 0; i < dims.x; ++i) {
        const Vec3 p((i + 0.5) / dims.x, (j + 0.5) / dims.y, (k + 0.5) / dims.z);
        values[idx++] = static_cast<float>(evaluate_synthetic(spec, p));
      }
    }
  }
  const ValueRange raw = normalize_unit_interval(values);
  const Vec3 spacing(1.0 / dims.x, 1.0 / dims.y, 1.0 / dims.z);
  return VolumeGrid(dims, spacing, std::move(values), raw);
}

VolumeGrid load_raw_volume(const std::filesystem::path& path, const RawDescriptor& descriptor) {
  check_dims(descriptor.dims);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open volume file '" + path.string() + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

  const std::size_t esize = element_size(descriptor.encoding);
  const std::uint64_t expected = static_cast<std::uint64_t>(descriptor.dims.count()) * esize;
  const std::uint64_t actual =
      bytes.size() >= descriptor.payload_offset ? bytes.size() - descriptor.payload_offset : 0;
  if (actual != expected) {
    throw Error(ErrorKind::structural, "volume payload size mismatch: expected " +
                                           std::to_string(expected) + " bytes, got " +
                                           std::to_string(actual));
  }

  const auto* payload = reinterpret_cast<const unsigned char*>(bytes.data()) + descriptor.payload_offset;
  const std::size_t n = descriptor.dims.count();
  std::vector<float> values(n);
  ValueRange raw{};

  switch (descriptor.encoding) {
    case ScalarEncoding::u8: {
      for (std::size_t i = 0; i < n; ++i) values[i] = static_cast<float>(payload[i]);
      raw = compute_range(values);
      for (auto& v : values) v = static_cast<float>(static_cast<double>(v) / 255.0);
      break;
    }
    case ScalarEncoding::u16le: {
      for (std::size_t i = 0; i < n; ++i) {
        values[i] = static_cast<float>(read_le<std::uint16_t>(payload + 2 * i));
      }
      raw = compute_range(values);
      for (auto& v : values) v = static_cast<float>(static_cast<double>(v) / 65535.0);
      break;
    }
    case ScalarEncoding::f32le: {
      for (std::size_t i = 0; i < n; ++i) {
        values[i] = read_le<float>(payload + 4 * i);
        if (!std::isfinite(values[i])) {
          throw Error(ErrorKind::validation,
                      "volume contains a non-finite value at index " + std::to_string(i));
        }
      }
      raw = normalize_unit_interval(values);
      break;
    }
  }
  return VolumeGrid(descriptor.dims, descriptor.spacing, std::move(values), raw);
}

RawDescriptor parse_qvol_header(std::string_view line) {
  std::istringstream in{std::string(line)};
  std::string magic;
  std::string dtype;
  RawDescriptor d;
  in >> magic;
  if (magic != "qvol1") {
    throw Error(ErrorKind::unsupported_format, "not a qvol1 file (header starts with '" + magic + "')");
  }
  if (!(in >> d.dims.x >> d.dims.y >> d.dims.z >> dtype >> d.spacing.x() >> d.spacing.y() >>
        d.spacing.z())) {
    throw Error(ErrorKind::parse, "malformed qvol1 header: '" + std::string(line) + "'");
  }
  std::string extra;
  if (in >> extra) {
    throw Error(ErrorKind::parse, "trailing token '" + extra + "' in qvol1 header");
  }
  d.encoding = parse_encoding(dtype);
  check_dims(d.dims);
  d.payload_offset = line.size() + 1;
  return d;
}

std::string format_qvol_header(Dims dims, ScalarEncoding encoding, const Vec3& spacing) {
  std::string out = "qvol1 " + std::to_string(dims.x) + " " + std::to_string(dims.y) + " " +
                    std::to_string(dims.z) + " " + std::string(to_string(encoding));
  for (int a = 0; a < 3; ++a) out += " " + format_real(spacing[a]);
  return out;
}

VolumeGrid load_qvol(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::io, "cannot open volume file '" + path.string() + "'");
  std::string header;
  if (!std::getline(in, header)) {
    throw Error(ErrorKind::parse, "empty volume file '" + path.string() + "'");
  }
  const RawDescriptor d = parse_qvol_header(header);
  in.close();
  return load_raw_volume(path, d);
}

void write_qvol(const std::filesystem::path& path, const VolumeGrid& grid, ScalarEncoding encoding) {
  std::string out = format_qvol_header(grid.dims(), encoding, grid.spacing());
  out.push_back('\n');
  const auto values = grid.values();
  out.reserve(out.size() + values.size() * element_size(encoding));
  for (const float v : values) {
    switch (encoding) {
      case ScalarEncoding::u8:
        out.push_back(static_cast<char>(
            static_cast<unsigned char>(std::lround(std::clamp(static_cast<double>(v), 0.0, 1.0) * 255.0))));
        break;
      case ScalarEncoding::u16le:
        append_le(out, static_cast<std::uint16_t>(
                           std::lround(std::clamp(static_cast<double>(v), 0.0, 1.0) * 65535.0)));
        break;
      case ScalarEncoding::f32le:
        append_le(out, v);
        break;
    }
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw Error(ErrorKind::io, "cannot write volume file '" + path.string() + "'");
  file.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!file) throw Error(ErrorKind::io, "short write to '" + path.string() + "'");
}

std::array<int, 3> voxel_index(const Vec3& p, Dims dims) noexcept {
  std::array<int, 3> out{};
  for (int a = 0; a < 3; ++a) {
    const double scaled = std::floor(p[a] * dims[a]);
    // NaN compares false and lands on 0.
    int idx = 0;
    if (scaled >= static_cast<double>(dims[a] - 1)) {
      idx = dims[a] - 1;
    } else if (scaled > 0.0) {
      idx = static_cast<int>(scaled);
    }
    out[a] = idx;
  }
  return out;
}

double sample_trilinear(const VolumeGrid& grid, const Vec3& p) noexcept {
  const Dims& d = grid.dims();
  int i0[3];
  double f[3];
  for (int a = 0; a < 3; ++a) {
    const int n = d[a];
    double u = p[a] * n - 0.5;
    if (!(u > 0.0)) u = 0.0;
    if (u > n - 1) u = n - 1;
    int i = static_cast<int>(u);
    if (i > n - 2) i = n - 2;
    i0[a] = i;
    f[a] = u - i;
  }
  const auto v = [&](int di, int dj, int dk) {
    return static_cast<double>(grid.at(i0[0] + di, i0[1] + dj, i0[2] + dk));
  };
  const double c00 = v(0, 0, 0) + (v(1, 0, 0) - v(0, 0, 0)) * f[0];
  const double c10 = v(0, 1, 0) + (v(1, 1, 0) - v(0, 1, 0)) * f[0];
  const double c01 = v(0, 0, 1) + (v(1, 0, 1) - v(0, 0, 1)) * f[0];
  const double c11 = v(0, 1, 1) + (v(1, 1, 1) - v(0, 1, 1)) * f[0];
  const double c0 = c00 + (c10 - c00) * f[1];
  const double c1 = c01 + (c11 - c01) * f[1];
  return c0 + (c1 - c0) * f[2];
}

double gradient_magnitude(const VolumeGrid& grid, const Vec3& p) noexcept {
  const Dims& d = grid.dims();
  double sq = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double h = 1.0 / d[a];
    Vec3 lo = p;
    Vec3 hi = p;
    lo[a] = std::max(p[a] - h, 0.0);
    hi[a] = std::min(p[a] + h, 1.0);
    const double span = hi[a] - lo[a];
    if (!(span > 0.0)) continue;
    const double g = (sample_trilinear(grid, hi) - sample_trilinear(grid, lo)) / span;
    sq += g * g;
  }
  return std::sqrt(sq);
}

}  // namespace qlens

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qlens/context_dvr.hpp"
#include "qlens/focus_shading.hpp"
#include "qlens/quadric_lens.hpp"
#include "qlens/volume.hpp"

namespace qlens {

struct RenderSettings {
  FocusSettings focus;
  ContextSettings context;
  double curvature_sensitivity = 1.0;
  CurvatureMapping curvature_mapping = CurvatureMapping::literal;
  double grab_radius = 0.05;

  void validate() const;
};

/// Where a scene's volume comes from: a QVOL file (resolved relative to the
/// scene file) or an inline synthetic field.
struct VolumeSource {
  std::string path;
  std::optional<SyntheticSpec> synthetic;
  Dims dims{64, 64, 64};  // synthetic only
};

/// Persistent scene content. `volume` is the loaded grid and is not part of
/// the serialized form.
struct Scene {
  VolumeSource volume_source;
  std::shared_ptr<const VolumeGrid> volume;
  Camera camera;
  Rgb background{0.0, 0.0, 0.0};
  RenderSettings settings;
  std::vector<QuadricLens> lenses;

  const QuadricLens* find_lens(LensId id) const;
  QuadricLens* find_lens(LensId id);
};

}  // namespace qlens
